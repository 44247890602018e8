#include "lambdaehr/autodiff.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lambdaehr {

Parameter *ParameterSet::Add(const std::string &name, Eigen::Index rows, Eigen::Index cols,
                             std::mt19937_64 *rng, double scale) {
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value.resize(rows, cols);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) p->value(i, j) = rng ? dist(*rng) : 0.0;
  }
  p->grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return params_.back().get();
}

Parameter *ParameterSet::Find(const std::string &name) const {
  for (const auto &p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

void ParameterSet::ZeroGrad() {
  for (auto &p : params_) p->grad.setZero();
}

double ParameterSet::GradNorm() const {
  double s = 0;
  for (const auto &p : params_) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

void ParameterSet::ScaleGrad(double factor) {
  for (auto &p : params_) p->grad *= factor;
}

void ParameterSet::SgdStep(double learning_rate) {
  for (auto &p : params_) p->value -= learning_rate * p->grad;
}

std::size_t ParameterSet::ScalarCount() const {
  std::size_t n = 0;
  for (const auto &p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::vector<Matrix> ParameterSet::Snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto &p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::Restore(const std::vector<Matrix> &values) {
  if (values.size() != params_.size()) throw std::logic_error("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

Eigen::VectorXd MaskedSoftmax(const Eigen::VectorXd &logits, const std::vector<int> *valid) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(logits.size());
  if (valid) {
    if (valid->empty()) return out;
    double m = -std::numeric_limits<double>::infinity();
    for (int i : *valid) m = std::max(m, logits(i));
    double z = 0;
    for (int i : *valid) {
      out(i) = std::exp(logits(i) - m);
      z += out(i);
    }
    for (int i : *valid) out(i) /= z;
    return out;
  }
  double m = logits.maxCoeff();
  out = (logits.array() - m).exp().matrix();
  return out / out.sum();
}

Graph::Graph(bool training, std::mt19937_64 *rng) : training_(training), rng_(rng) {
  nodes_.reserve(1024);
}

Graph::Id Graph::Push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::Constant(Matrix value) {
  Node n{Op::kConstant, {}, std::move(value)};
  return Push(std::move(n));
}

Graph::Id Graph::Param(Parameter *p) {
  auto it = param_ids_.find(p);
  if (it != param_ids_.end()) return it->second;
  Node n{Op::kParam, {}, p->value};
  n.param = p;
  Id id = Push(std::move(n));
  param_ids_[p] = id;
  return id;
}

Graph::Id Graph::Lookup(Parameter *table, int col) {
  Node n{Op::kLookup, {}, table->value.col(col)};
  n.param = table;
  n.index = col;
  return Push(std::move(n));
}

Graph::Id Graph::MatMul(Id a, Id b) {
  Node n{Op::kMatMul, {a, b}, nodes_[a].value * nodes_[b].value};
  return Push(std::move(n));
}

Graph::Id Graph::MatMulTN(Id a, Id b) {
  Node n{Op::kMatMulTN, {a, b}, nodes_[a].value.transpose() * nodes_[b].value};
  return Push(std::move(n));
}

Graph::Id Graph::Add(Id a, Id b) {
  Node n{Op::kAdd, {a, b}, nodes_[a].value + nodes_[b].value};
  return Push(std::move(n));
}

Graph::Id Graph::Mul(Id a, Id b) {
  Node n{Op::kMul, {a, b}, nodes_[a].value.cwiseProduct(nodes_[b].value)};
  return Push(std::move(n));
}

Graph::Id Graph::Sigmoid(Id a) {
  Node n{Op::kSigmoid, {a}, (1.0 / (1.0 + (-nodes_[a].value.array()).exp())).matrix()};
  return Push(std::move(n));
}

Graph::Id Graph::Tanh(Id a) {
  Node n{Op::kTanh, {a}, nodes_[a].value.array().tanh().matrix()};
  return Push(std::move(n));
}

Graph::Id Graph::Concat(const std::vector<Id> &parts) {
  Eigen::Index rows = 0;
  Eigen::Index cols = nodes_[parts.front()].value.cols();
  for (Id p : parts) rows += nodes_[p].value.rows();
  Matrix v(rows, cols);
  Eigen::Index r = 0;
  for (Id p : parts) {
    const Matrix &m = nodes_[p].value;
    v.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  Node n{Op::kConcat, parts, std::move(v)};
  return Push(std::move(n));
}

Graph::Id Graph::HCat(const std::vector<Id> &columns) {
  Matrix v(nodes_[columns.front()].value.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) v.col(j) = nodes_[columns[j]].value.col(0);
  Node n{Op::kHCat, columns, std::move(v)};
  return Push(std::move(n));
}

Graph::Id Graph::Rows(Id a, int start, int count) {
  Node n{Op::kRows, {a}, nodes_[a].value.middleRows(start, count)};
  n.index = start;
  return Push(std::move(n));
}

Graph::Id Graph::Softmax(Id a) {
  Node n{Op::kSoftmax, {a}, MaskedSoftmax(nodes_[a].value.col(0), nullptr)};
  return Push(std::move(n));
}

Graph::Id Graph::MaskedNll(Id logits, int target, const std::vector<int> *valid) {
  Eigen::VectorXd p = MaskedSoftmax(nodes_[logits].value.col(0), valid);
  Node n{Op::kMaskedNll, {logits}, Matrix::Constant(1, 1, -std::log(p(target)))};
  n.index = target;
  n.aux = p;
  return Push(std::move(n));
}

Graph::Id Graph::ScalarMul(Id scalar, Id v) {
  Node n{Op::kScalarMul, {scalar, v}, nodes_[scalar].value(0, 0) * nodes_[v].value};
  return Push(std::move(n));
}

Graph::Id Graph::OneMinus(Id scalar) {
  Node n{Op::kOneMinus, {scalar}, Matrix::Constant(1, 1, 1.0 - nodes_[scalar].value(0, 0))};
  return Push(std::move(n));
}

Graph::Id Graph::Pick(Id v, int index) {
  Node n{Op::kPick, {v}, Matrix::Constant(1, 1, nodes_[v].value(index, 0))};
  n.index = index;
  return Push(std::move(n));
}

Graph::Id Graph::SumAt(Id v, const std::vector<int> &indices) {
  double s = 0;
  for (int i : indices) s += nodes_[v].value(i, 0);
  Node n{Op::kSumAt, {v}, Matrix::Constant(1, 1, s)};
  n.indices = indices;
  return Push(std::move(n));
}

Graph::Id Graph::NegLog(Id scalar) {
  Node n{Op::kNegLog, {scalar}, Matrix::Constant(1, 1, -std::log(nodes_[scalar].value(0, 0)))};
  return Push(std::move(n));
}

Graph::Id Graph::Sum(const std::vector<Id> &scalars) {
  double s = 0;
  for (Id i : scalars) s += nodes_[i].value(0, 0);
  Node n{Op::kSum, scalars, Matrix::Constant(1, 1, s)};
  return Push(std::move(n));
}

Graph::Id Graph::Dropout(Id a, double rate) {
  if (!training_ || rate <= 0 || !rng_) return a;
  const Matrix &x = nodes_[a].value;
  Matrix mask(x.rows(), x.cols());
  std::bernoulli_distribution keep(1.0 - rate);
  double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) mask(i, j) = keep(*rng_) ? scale : 0.0;
  }
  Node n{Op::kDropout, {a}, x.cwiseProduct(mask)};
  n.aux = std::move(mask);
  return Push(std::move(n));
}

void Graph::Backward(Id loss) {
  for (Node &n : nodes_) n.grad.resize(0, 0);
  auto acc = [&](Id id, const Matrix &g) {
    Node &t = nodes_[id];
    if (t.grad.size() == 0) {
      t.grad = g;
    } else {
      t.grad += g;
    }
  };
  nodes_[loss].grad = Matrix::Ones(1, 1);
  for (Id id = loss; id >= 0; --id) {
    Node &n = nodes_[id];
    if (n.grad.size() == 0) continue;
    const Matrix &g = n.grad;
    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kParam:
        n.param->grad += g;
        break;
      case Op::kLookup:
        n.param->grad.col(n.index) += g.col(0);
        break;
      case Op::kMatMul:
        acc(n.in[0], g * nodes_[n.in[1]].value.transpose());
        acc(n.in[1], nodes_[n.in[0]].value.transpose() * g);
        break;
      case Op::kMatMulTN:
        acc(n.in[0], nodes_[n.in[1]].value * g.transpose());
        acc(n.in[1], nodes_[n.in[0]].value * g);
        break;
      case Op::kAdd:
        acc(n.in[0], g);
        acc(n.in[1], g);
        break;
      case Op::kMul:
        acc(n.in[0], g.cwiseProduct(nodes_[n.in[1]].value));
        acc(n.in[1], g.cwiseProduct(nodes_[n.in[0]].value));
        break;
      case Op::kSigmoid:
        acc(n.in[0], g.cwiseProduct(n.value.cwiseProduct((1.0 - n.value.array()).matrix())));
        break;
      case Op::kTanh:
        acc(n.in[0], g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::kConcat: {
        Eigen::Index r = 0;
        for (Id p : n.in) {
          Eigen::Index rows = nodes_[p].value.rows();
          acc(p, g.middleRows(r, rows));
          r += rows;
        }
        break;
      }
      case Op::kHCat:
        for (std::size_t j = 0; j < n.in.size(); ++j) acc(n.in[j], g.col(j));
        break;
      case Op::kRows: {
        Matrix full = Matrix::Zero(nodes_[n.in[0]].value.rows(), nodes_[n.in[0]].value.cols());
        full.middleRows(n.index, g.rows()) = g;
        acc(n.in[0], full);
        break;
      }
      case Op::kSoftmax: {
        double dot = g.col(0).dot(n.value.col(0));
        acc(n.in[0], n.value.cwiseProduct((g.array() - dot).matrix()));
        break;
      }
      case Op::kMaskedNll: {
        Matrix d = n.aux;
        d(n.index, 0) -= 1.0;
        acc(n.in[0], g(0, 0) * d);
        break;
      }
      case Op::kScalarMul: {
        const Matrix &v = nodes_[n.in[1]].value;
        acc(n.in[0], Matrix::Constant(1, 1, g.cwiseProduct(v).sum()));
        acc(n.in[1], nodes_[n.in[0]].value(0, 0) * g);
        break;
      }
      case Op::kOneMinus:
        acc(n.in[0], -g);
        break;
      case Op::kPick: {
        const Matrix &v = nodes_[n.in[0]].value;
        Matrix d = Matrix::Zero(v.rows(), v.cols());
        d(n.index, 0) = g(0, 0);
        acc(n.in[0], d);
        break;
      }
      case Op::kSumAt: {
        const Matrix &v = nodes_[n.in[0]].value;
        Matrix d = Matrix::Zero(v.rows(), v.cols());
        for (int i : n.indices) d(i, 0) += g(0, 0);
        acc(n.in[0], d);
        break;
      }
      case Op::kNegLog:
        acc(n.in[0], Matrix::Constant(1, 1, -g(0, 0) / nodes_[n.in[0]].value(0, 0)));
        break;
      case Op::kSum:
        for (Id i : n.in) acc(i, g);
        break;
      case Op::kDropout:
        acc(n.in[0], g.cwiseProduct(n.aux));
        break;
    }
  }
}

}  // namespace lambdaehr
