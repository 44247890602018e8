#ifndef LAMBDAEHR_AUTODIFF_H_
#define LAMBDAEHR_AUTODIFF_H_

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace lambdaehr {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Owns the trainable tensors of a model, in creation order.
class ParameterSet {
 public:
  Parameter *Add(const std::string &name, Eigen::Index rows, Eigen::Index cols,
                 std::mt19937_64 *rng, double scale = 0.1);
  Parameter *Find(const std::string &name) const;
  const std::vector<std::unique_ptr<Parameter>> &all() const { return params_; }

  void ZeroGrad();
  double GradNorm() const;
  void ScaleGrad(double factor);
  void SgdStep(double learning_rate);
  std::size_t ScalarCount() const;

  std::vector<Matrix> Snapshot() const;
  void Restore(const std::vector<Matrix> &values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Reverse-mode tape over column vectors and small matrices. Every op appends
// a node; Backward walks the tape once and accumulates into Parameter::grad.
class Graph {
 public:
  using Id = int;

  // `rng` drives dropout masks; dropout is the identity when not training.
  explicit Graph(bool training = false, std::mt19937_64 *rng = nullptr);

  bool training() const { return training_; }

  Id Constant(Matrix value);
  Id Param(Parameter *p);               // cached per graph
  Id Lookup(Parameter *table, int col);  // one column of an embedding table

  Id MatMul(Id a, Id b);
  Id MatMulTN(Id a, Id b);  // aᵀ b
  Id Add(Id a, Id b);
  Id Mul(Id a, Id b);
  Id Sigmoid(Id a);
  Id Tanh(Id a);
  Id Concat(const std::vector<Id> &parts);  // vertical stacking
  Id HCat(const std::vector<Id> &columns);  // columns side by side
  Id Rows(Id a, int start, int count);
  Id Softmax(Id a);
  // -log softmax(logits)[target], the softmax restricted to `valid` when
  // given (target must be among them).
  Id MaskedNll(Id logits, int target, const std::vector<int> *valid = nullptr);
  Id ScalarMul(Id scalar, Id v);
  Id OneMinus(Id scalar);
  Id Pick(Id v, int index);
  Id SumAt(Id v, const std::vector<int> &indices);
  Id NegLog(Id scalar);
  Id Sum(const std::vector<Id> &scalars);
  Id Dropout(Id a, double rate);

  const Matrix &value(Id id) const { return nodes_[id].value; }
  double scalar(Id id) const { return nodes_[id].value(0, 0); }

  void Backward(Id loss);

 private:
  enum class Op {
    kConstant, kParam, kLookup, kMatMul, kMatMulTN, kAdd, kMul, kSigmoid, kTanh,
    kConcat, kHCat, kRows, kSoftmax, kMaskedNll, kScalarMul, kOneMinus, kPick,
    kSumAt, kNegLog, kSum, kDropout,
  };
  struct Node {
    Node(Op o, std::vector<Id> inputs, Matrix v)
        : op(o), in(std::move(inputs)), value(std::move(v)) {}
    Op op;
    std::vector<Id> in;
    Matrix value;
    Matrix grad;
    Parameter *param = nullptr;
    int index = 0;
    std::vector<int> indices;
    Matrix aux;  // softmax probabilities or dropout mask
  };

  Id Push(Node node);

  bool training_;
  std::mt19937_64 *rng_;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter *, Id> param_ids_;
};

// Softmax over `logits`, restricted to `valid` when given (others exactly 0).
Eigen::VectorXd MaskedSoftmax(const Eigen::VectorXd &logits, const std::vector<int> *valid);

}  // namespace lambdaehr

#endif  // LAMBDAEHR_AUTODIFF_H_
