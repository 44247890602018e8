#include "lambdaehr/neural.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "lambdaehr/text.h"

namespace lambdaehr {

namespace {

constexpr char kBos[] = "<s>";
constexpr char kEos[] = "</s>";
constexpr char kRootField[] = "<root>";

// What a source token emits when copied: placeholders become their
// logical-form argument, anything else copies verbatim.
std::string CopyTarget(const std::string &token) {
  auto kind = PlaceholderKind(token);
  if (!kind) return token;
  switch (*kind) {
    case EntityKind::kConcept: return "concept";
    case EntityKind::kMeasurement: return "'measurement'";
    case EntityKind::kTemporalRef: return "'temporal_ref'";
    case EntityKind::kPerson: return token;
  }
  return token;
}

std::vector<std::string> SketchTokens(const LogicalForm &abstract_gold) {
  return LfTokens(Coarsen(abstract_gold));
}

Matrix Zeros(std::size_t n) { return Matrix::Zero(static_cast<Eigen::Index>(n), 1); }

}  // namespace

std::string_view DecodeModeName(DecodeMode m) {
  switch (m) {
    case DecodeMode::kDirect: return "direct";
    case DecodeMode::kSketch: return "sketch";
    case DecodeMode::kGrammar: return "grammar";
  }
  return "?";
}

DecodeMode ParseDecodeMode(std::string_view name) {
  for (DecodeMode m : {DecodeMode::kDirect, DecodeMode::kSketch, DecodeMode::kGrammar}) {
    if (DecodeModeName(m) == name) return m;
  }
  throw DataError("unknown decoding mode '" + std::string(name) + "'");
}

// ---- config ----

TrainingConfig TrainingConfig::Defaults(DecodeMode mode) {
  TrainingConfig c;
  c.mode = mode;
  switch (mode) {
    case DecodeMode::kGrammar:
      break;
    case DecodeMode::kSketch:
      c.hidden = 300;
      c.embed = 150;
      c.learning_rate = 0.005;
      c.validate_every = 10;
      c.patience = 0;
      break;
    case DecodeMode::kDirect:
      c.learning_rate = 5e-4;
      c.max_epochs = 200;
      break;
  }
  return c;
}

void TrainingConfig::Validate() const {
  if (hidden < 2) throw DataError("hidden size must be at least 2");
  if (embed < 1) throw DataError("word-vector dimension must be at least 1");
  if (!(learning_rate > 0)) throw DataError("learning rate must be positive");
  if (!(lr_decay > 0)) throw DataError("learning-rate decay must be positive");
  if (!(dropout >= 0 && dropout < 1)) throw DataError("dropout must be in [0, 1)");
  if (max_epochs < 1) throw DataError("max epochs must be at least 1");
  if (validate_every < 1) throw DataError("validate_every must be at least 1");
  if (beam < 1) throw DataError("beam size must be at least 1");
  if (!(clip_norm > 0)) throw DataError("clip norm must be positive");
}

nlohmann::json TrainingConfig::ToJson() const {
  return {{"mode", DecodeModeName(mode)},
          {"hidden", hidden},
          {"embed", embed},
          {"learning_rate", learning_rate},
          {"lr_decay", lr_decay},
          {"dropout", dropout},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"validate_every", validate_every},
          {"seed", seed},
          {"clip_norm", clip_norm},
          {"beam", beam},
          {"copy", copy},
          {"embeddings", embeddings}};
}

TrainingConfig TrainingConfig::FromJson(const nlohmann::json &j) {
  try {
    TrainingConfig c = Defaults(ParseDecodeMode(j.value("mode", std::string("grammar"))));
    c.hidden = j.value("hidden", c.hidden);
    c.embed = j.value("embed", c.embed);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.dropout = j.value("dropout", c.dropout);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.validate_every = j.value("validate_every", c.validate_every);
    c.seed = j.value("seed", c.seed);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.beam = j.value("beam", c.beam);
    c.copy = j.value("copy", c.copy);
    c.embeddings = j.value("embeddings", c.embeddings);
    c.Validate();
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("training config: ") + e.what());
  }
}

// ---- vocabulary and embeddings ----

Vocabulary::Vocabulary() { Add("<unk>"); }

Vocabulary::Vocabulary(const std::vector<std::string> &tokens) : Vocabulary() {
  for (const std::string &t : tokens) Add(t);
}

int Vocabulary::Add(const std::string &token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int i = size();
  tokens_.push_back(token);
  index_.emplace(token, i);
  return i;
}

int Vocabulary::Index(const std::string &token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

EmbeddingTable LoadEmbeddings(const std::string &path, const Vocabulary &vocab, std::size_t dim,
                              std::uint64_t seed, bool allow_missing) {
  EmbeddingTable table;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  table.vectors.resize(static_cast<Eigen::Index>(dim), vocab.size());
  for (Eigen::Index j = 0; j < table.vectors.cols(); ++j) {
    for (Eigen::Index i = 0; i < table.vectors.rows(); ++i) table.vectors(i, j) = dist(rng);
  }
  std::ifstream in(path);
  if (!in) {
    if (allow_missing) return table;
    throw DataError("cannot open embedding file " + path);
  }
  std::vector<bool> found(static_cast<std::size_t>(vocab.size()), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    std::string v;
    while (fields >> v) {
      std::size_t used = 0;
      double x;
      try {
        x = std::stod(v, &used);
      } catch (const std::exception &) {
        throw MalformedLine(line_no);
      }
      if (used != v.size() || !std::isfinite(x)) throw MalformedLine(line_no);
      values.push_back(x);
    }
    if (values.empty()) throw MalformedLine(line_no);
    if (values.size() != dim) throw DimensionMismatch(line_no, values.size(), dim);
    if (!vocab.Contains(token)) continue;
    int col = vocab.Index(token);
    for (std::size_t i = 0; i < dim; ++i) {
      table.vectors(static_cast<Eigen::Index>(i), col) = values[i];
    }
    found[static_cast<std::size_t>(col)] = true;
  }
  std::size_t hits = 0;
  for (int i = 1; i < vocab.size(); ++i) hits += found[static_cast<std::size_t>(i)];
  if (vocab.size() > 1) table.coverage = static_cast<double>(hits) / (vocab.size() - 1);
  return table;
}

// ---- model plumbing ----

struct NeuralParser::Item {
  std::vector<std::string> source;
  std::vector<int> target;
  std::vector<std::vector<int>> copy_positions;  // direct
  std::vector<int> fields;                       // grammar
  std::vector<std::vector<int>> valid;           // grammar
  std::vector<int> fine;                         // sketch
  std::vector<int> holes;                        // sketch: '@' positions in target
  std::vector<std::vector<int>> fine_valid;      // sketch
};

struct NeuralParser::Encoded {
  Graph::Id states;
  Graph::Id summary;
  int length = 0;
};

struct NeuralParser::DecState {
  Graph::Id h = -1, c = -1, feed = -1;
  Graph::Id alpha = -1, ctx = -1, logits = -1, gate = -1;
};

NeuralParser::NeuralParser(TrainingConfig cfg, PredicateRegistry registry)
    : cfg_(std::move(cfg)), system_(AsdlGrammar::Default(), std::move(registry)) {}

std::string NeuralParser::mode() const { return std::string(DecodeModeName(cfg_.mode)); }

void NeuralParser::BuildVocabularies(const Dataset &data, const std::vector<SequencePair> &pairs) {
  src_vocab_ = Vocabulary();
  tgt_vocab_ = Vocabulary();
  field_vocab_ = Vocabulary();
  fine_vocab_ = Vocabulary();
  tgt_vocab_.Add(kBos);
  max_target_ = 0;
  for (const Example &e : data) {
    for (const std::string &t : e.input.tokens) src_vocab_.Add(t);
  }
  switch (cfg_.mode) {
    case DecodeMode::kDirect:
      tgt_vocab_.Add(kEos);
      for (const Example &e : data) {
        auto toks = LfTokens(e.abstract_gold);
        for (const std::string &t : toks) tgt_vocab_.Add(t);
        max_target_ = std::max(max_target_, toks.size() + 1);
      }
      for (const SequencePair &p : pairs) {
        for (const std::string &t : p.source) src_vocab_.Add(t);
        for (const std::string &t : p.target) tgt_vocab_.Add(t);
      }
      break;
    case DecodeMode::kSketch:
      tgt_vocab_.Add(kEos);
      for (const Example &e : data) {
        auto toks = SketchTokens(e.abstract_gold);
        for (const std::string &t : toks) tgt_vocab_.Add(t);
        for (const std::string &t : FineTokens(e.abstract_gold)) fine_vocab_.Add(t);
        max_target_ = std::max(max_target_, toks.size() + 1);
      }
      break;
    case DecodeMode::kGrammar: {
      field_vocab_.Add(kRootField);
      for (const AsdlConstructor &c : system_.grammar().constructors()) {
        tgt_vocab_.Add(Action::ApplyConstr(c.name).ToString());
        for (const AsdlField &f : c.fields) field_vocab_.Add(c.name + "." + f.name);
      }
      tgt_vocab_.Add(Action::Reduce().ToString());
      for (const std::string &name : system_.registry().Names()) {
        tgt_vocab_.Add(Action::GenToken(name).ToString());
      }
      for (const Example &e : data) {
        auto actions = system_.LfToActions(e.abstract_gold);
        for (const Action &a : actions) tgt_vocab_.Add(a.ToString());
        max_target_ = std::max(max_target_, actions.size());
      }
      break;
    }
  }
}

void NeuralParser::InitParameters() {
  std::mt19937_64 rng(cfg_.seed);
  params_ = ParameterSet();
  auto H = static_cast<Eigen::Index>(cfg_.hidden);
  auto E = static_cast<Eigen::Index>(cfg_.embed);
  Eigen::Index hf = H / 2, hb = H - H / 2;
  auto lstm = [&](const std::string &prefix, Eigen::Index in) {
    params_.Add(prefix + "_f_w", 4 * hf, in + hf, &rng);
    params_.Add(prefix + "_f_b", 4 * hf, 1, &rng);
    params_.Add(prefix + "_b_w", 4 * hb, in + hb, &rng);
    params_.Add(prefix + "_b_b", 4 * hb, 1, &rng);
  };
  w_ = Weights();
  w_.src_emb = params_.Add("src_emb", E, src_vocab_.size(), &rng);
  lstm("enc", E);
  w_.init_w = params_.Add("init_w", H, H, &rng);
  w_.init_b = params_.Add("init_b", H, 1, &rng);
  w_.tgt_emb = params_.Add("tgt_emb", E, tgt_vocab_.size(), &rng);
  Eigen::Index in = E;
  if (cfg_.mode == DecodeMode::kGrammar) {
    w_.field_emb = params_.Add("field_emb", E, field_vocab_.size(), &rng);
    in += E;
  }
  w_.dec_w = params_.Add("dec_w", 4 * H, in + 2 * H, &rng);
  w_.dec_b = params_.Add("dec_b", 4 * H, 1, &rng);
  w_.att_w = params_.Add("att_w", H, H, &rng);
  w_.comb_w = params_.Add("comb_w", H, 2 * H, &rng);
  w_.comb_b = params_.Add("comb_b", H, 1, &rng);
  w_.out_w = params_.Add("out_w", tgt_vocab_.size(), H, &rng);
  w_.out_b = params_.Add("out_b", tgt_vocab_.size(), 1, &rng);
  if (cfg_.mode == DecodeMode::kDirect && cfg_.copy) {
    w_.gen_w = params_.Add("gen_w", 1, 2 * H, &rng);
    w_.gen_b = params_.Add("gen_b", 1, 1, &rng);
  }
  if (cfg_.mode == DecodeMode::kSketch) {
    lstm("sk", E);
    w_.fatt_w = params_.Add("fatt_w", H, H, &rng);
    w_.fcomb_w = params_.Add("fcomb_w", H, 2 * H, &rng);
    w_.fcomb_b = params_.Add("fcomb_b", H, 1, &rng);
    w_.fout_w = params_.Add("fout_w", fine_vocab_.size(), H, &rng);
    w_.fout_b = params_.Add("fout_b", fine_vocab_.size(), 1, &rng);
  }
}

std::vector<int> NeuralParser::ValidIndices(const Derivation &d) const {
  ValidActions valid = d.Next();
  std::vector<int> out;
  for (const Action &a : valid.closed) {
    std::string s = a.ToString();
    if (tgt_vocab_.Contains(s)) out.push_back(tgt_vocab_.Index(s));
  }
  if (!valid.open_type.empty()) {
    for (int i = 1; i < tgt_vocab_.size(); ++i) {
      const std::string &s = tgt_vocab_.Token(i);
      if (s.rfind("GEN ", 0) != 0) continue;
      if (d.Accepts(Action::GenToken(s.substr(4)), valid)) out.push_back(i);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

NeuralParser::Item NeuralParser::MakeItem(const Example &e) const {
  Item item;
  item.source = e.input.tokens;
  switch (cfg_.mode) {
    case DecodeMode::kDirect: {
      SequencePair p{e.id, e.input.tokens, LfTokens(e.abstract_gold)};
      return MakePairItem(p);
    }
    case DecodeMode::kSketch: {
      LogicalForm sketch = Coarsen(e.abstract_gold);
      auto toks = LfTokens(sketch);
      for (std::size_t i = 0; i < toks.size(); ++i) {
        item.target.push_back(tgt_vocab_.Index(toks[i]));
        if (toks[i] == "@") item.holes.push_back(static_cast<int>(i));
      }
      item.target.push_back(tgt_vocab_.Index(kEos));
      auto slots = PlaceholderSlots(sketch, system_.registry());
      auto fine = FineTokens(e.abstract_gold);
      for (std::size_t k = 0; k < fine.size(); ++k) {
        item.fine.push_back(fine_vocab_.Index(fine[k]));
        std::vector<int> valid;
        for (int i = 1; i < fine_vocab_.size(); ++i) {
          if (FitsSlot(fine_vocab_.Token(i), slots[k], system_.registry())) valid.push_back(i);
        }
        item.fine_valid.push_back(std::move(valid));
      }
      break;
    }
    case DecodeMode::kGrammar: {
      Derivation d(&system_);
      for (const Action &a : system_.LfToActions(e.abstract_gold)) {
        item.fields.push_back(field_vocab_.Index(d.FrontierField()));
        item.valid.push_back(ValidIndices(d));
        item.target.push_back(tgt_vocab_.Index(a.ToString()));
        d.Apply(a);
      }
      break;
    }
  }
  return item;
}

NeuralParser::Item NeuralParser::MakePairItem(const SequencePair &p) const {
  Item item;
  item.source = p.source;
  std::vector<std::string> mapped;
  for (const std::string &s : p.source) mapped.push_back(CopyTarget(s));
  auto add = [&](const std::string &tok) {
    item.target.push_back(tgt_vocab_.Index(tok));
    std::vector<int> pos;
    for (std::size_t i = 0; i < mapped.size(); ++i) {
      if (mapped[i] == tok) pos.push_back(static_cast<int>(i));
    }
    item.copy_positions.push_back(std::move(pos));
  };
  for (const std::string &t : p.target) add(t);
  add(kEos);
  return item;
}

Graph::Id NeuralParser::BiLstm(Graph *g, const std::vector<Graph::Id> &inputs,
                               const std::string &prefix, std::vector<Graph::Id> *states) const {
  auto run = [&](const std::string &dir, bool reverse, std::vector<Graph::Id> *out) {
    Parameter *w = params_.Find(prefix + "_" + dir + "_w");
    Parameter *b = params_.Find(prefix + "_" + dir + "_b");
    int n = static_cast<int>(w->value.rows() / 4);
    Graph::Id W = g->Param(w), B = g->Param(b);
    Graph::Id h = g->Constant(Zeros(static_cast<std::size_t>(n)));
    Graph::Id c = h;
    out->assign(inputs.size(), -1);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      std::size_t t = reverse ? inputs.size() - 1 - k : k;
      Graph::Id gates = g->Add(g->MatMul(W, g->Concat({inputs[t], h})), B);
      Graph::Id i = g->Sigmoid(g->Rows(gates, 0, n));
      Graph::Id f = g->Sigmoid(g->Rows(gates, n, n));
      Graph::Id o = g->Sigmoid(g->Rows(gates, 2 * n, n));
      Graph::Id u = g->Tanh(g->Rows(gates, 3 * n, n));
      c = g->Add(g->Mul(f, c), g->Mul(i, u));
      h = g->Mul(o, g->Tanh(c));
      (*out)[t] = h;
    }
  };
  std::vector<Graph::Id> fwd, bwd;
  run("f", false, &fwd);
  run("b", true, &bwd);
  states->clear();
  for (std::size_t t = 0; t < inputs.size(); ++t) states->push_back(g->Concat({fwd[t], bwd[t]}));
  return g->Concat({fwd.back(), bwd.front()});
}

NeuralParser::Encoded NeuralParser::EncodeGraph(Graph *g,
                                                const std::vector<std::string> &tokens) const {
  if (tokens.empty()) throw EmptyInput();
  std::vector<Graph::Id> inputs;
  for (const std::string &t : tokens) {
    inputs.push_back(g->Dropout(g->Lookup(w_.src_emb, src_vocab_.Index(t)), cfg_.dropout));
  }
  std::vector<Graph::Id> states;
  Encoded enc;
  enc.summary = BiLstm(g, inputs, "enc", &states);
  enc.states = g->HCat(states);
  enc.length = static_cast<int>(tokens.size());
  return enc;
}

NeuralParser::DecState NeuralParser::InitialState(Graph *g, const Encoded &enc) const {
  DecState s;
  s.h = g->Tanh(g->Add(g->MatMul(g->Param(w_.init_w), enc.summary), g->Param(w_.init_b)));
  s.c = g->Constant(Zeros(cfg_.hidden));
  s.feed = s.c;
  return s;
}

NeuralParser::DecState NeuralParser::DecoderStep(Graph *g, const Encoded &enc,
                                                 const DecState &prev, Graph::Id input) const {
  int n = static_cast<int>(cfg_.hidden);
  DecState s;
  Graph::Id gates = g->Add(g->MatMul(g->Param(w_.dec_w), g->Concat({input, prev.feed, prev.h})),
                           g->Param(w_.dec_b));
  Graph::Id i = g->Sigmoid(g->Rows(gates, 0, n));
  Graph::Id f = g->Sigmoid(g->Rows(gates, n, n));
  Graph::Id o = g->Sigmoid(g->Rows(gates, 2 * n, n));
  Graph::Id u = g->Tanh(g->Rows(gates, 3 * n, n));
  s.c = g->Add(g->Mul(f, prev.c), g->Mul(i, u));
  s.h = g->Mul(o, g->Tanh(s.c));
  Graph::Id scores = g->MatMulTN(enc.states, g->MatMul(g->Param(w_.att_w), s.h));
  s.alpha = g->Softmax(scores);
  s.ctx = g->MatMul(enc.states, s.alpha);
  Graph::Id hc = g->Concat({s.h, s.ctx});
  Graph::Id ht = g->Tanh(g->Add(g->MatMul(g->Param(w_.comb_w), hc), g->Param(w_.comb_b)));
  s.feed = g->Dropout(ht, cfg_.dropout);
  s.logits = g->Add(g->MatMul(g->Param(w_.out_w), s.feed), g->Param(w_.out_b));
  if (w_.gen_w) {
    s.gate = g->Sigmoid(g->Add(g->MatMul(g->Param(w_.gen_w), g->Concat({s.feed, s.ctx})),
                               g->Param(w_.gen_b)));
  }
  return s;
}

namespace {

// Fine-stage logits, one per '@' of the sketch.
std::vector<Graph::Id> FineLogits(Graph *g, Graph::Id enc_states, const std::vector<Graph::Id> &sk,
                                  const std::vector<int> &holes, Parameter *att, Parameter *comb_w,
                                  Parameter *comb_b, Parameter *out_w, Parameter *out_b,
                                  double dropout) {
  std::vector<Graph::Id> out;
  for (int pos : holes) {
    Graph::Id q = sk[static_cast<std::size_t>(pos)];
    Graph::Id alpha = g->Softmax(g->MatMulTN(enc_states, g->MatMul(g->Param(att), q)));
    Graph::Id ctx = g->MatMul(enc_states, alpha);
    Graph::Id h = g->Tanh(g->Add(g->MatMul(g->Param(comb_w), g->Concat({q, ctx})), g->Param(comb_b)));
    h = g->Dropout(h, dropout);
    out.push_back(g->Add(g->MatMul(g->Param(out_w), h), g->Param(out_b)));
  }
  return out;
}

}  // namespace

Graph::Id NeuralParser::ItemLoss(Graph *g, const Item &item) const {
  Encoded enc = EncodeGraph(g, item.source);
  DecState st = InitialState(g, enc);
  std::vector<Graph::Id> losses;
  int bos = tgt_vocab_.Index(kBos);
  for (std::size_t t = 0; t < item.target.size(); ++t) {
    int prev = t == 0 ? bos : item.target[t - 1];
    Graph::Id input = g->Lookup(w_.tgt_emb, prev);
    if (cfg_.mode == DecodeMode::kGrammar) {
      input = g->Concat({input, g->Lookup(w_.field_emb, item.fields[t])});
    }
    st = DecoderStep(g, enc, st, g->Dropout(input, cfg_.dropout));
    int y = item.target[t];
    if (cfg_.mode == DecodeMode::kGrammar) {
      losses.push_back(g->MaskedNll(st.logits, y, &item.valid[t]));
    } else if (cfg_.mode == DecodeMode::kDirect && cfg_.copy) {
      Graph::Id pv = g->Softmax(st.logits);
      std::vector<Graph::Id> parts;
      if (y != Vocabulary::kUnk || item.copy_positions[t].empty()) {
        parts.push_back(g->ScalarMul(st.gate, g->Pick(pv, y)));
      }
      if (!item.copy_positions[t].empty()) {
        parts.push_back(
            g->ScalarMul(g->OneMinus(st.gate), g->SumAt(st.alpha, item.copy_positions[t])));
      }
      Graph::Id p = parts.size() == 1 ? parts[0] : g->Add(parts[0], parts[1]);
      losses.push_back(g->NegLog(p));
    } else {
      losses.push_back(g->MaskedNll(st.logits, y));
    }
  }
  if (cfg_.mode == DecodeMode::kSketch && !item.holes.empty()) {
    std::vector<Graph::Id> inputs;
    for (std::size_t t = 0; t + 1 < item.target.size(); ++t) {
      inputs.push_back(g->Dropout(g->Lookup(w_.tgt_emb, item.target[t]), cfg_.dropout));
    }
    std::vector<Graph::Id> sk;
    BiLstm(g, inputs, "sk", &sk);
    auto logits = FineLogits(g, enc.states, sk, item.holes, w_.fatt_w, w_.fcomb_w, w_.fcomb_b,
                             w_.fout_w, w_.fout_b, cfg_.dropout);
    for (std::size_t k = 0; k < logits.size(); ++k) {
      losses.push_back(g->MaskedNll(logits[k], item.fine[k], &item.fine_valid[k]));
    }
  }
  return g->Sum(losses);
}

// ---- decoding ----

namespace {

struct Hyp {
  double score = 0;
  std::vector<int> out;
  std::optional<Derivation> deriv;
};

}  // namespace

ParseResult NeuralParser::ParseWithBeam(const AbstractedQuestion &q, std::size_t beam) const {
  switch (cfg_.mode) {
    case DecodeMode::kDirect: return DecodeDirect(q, beam);
    case DecodeMode::kSketch: return DecodeSketch(q, beam);
    case DecodeMode::kGrammar: return DecodeGrammar(q, beam);
  }
  return {};
}

ParseResult NeuralParser::Parse(const AbstractedQuestion &q) const {
  return ParseWithBeam(q, cfg_.beam);
}

namespace {

// Generic beam search. `expand` returns (index, probability) candidates for a
// hypothesis given its decoder state; `finish` says whether appending the
// index ends the hypothesis (and may update its derivation).
template <typename Step, typename Expand, typename Advance>
std::vector<Hyp> RunBeam(std::size_t beam, std::size_t max_steps, Hyp start, Step step,
                         Expand expand, Advance advance) {
  struct Live {
    Hyp hyp;
    int state;  // opaque handle owned by `step`
  };
  std::vector<Live> live{{std::move(start), -1}};
  std::vector<Hyp> finished;
  for (std::size_t t = 0; t < max_steps && !live.empty(); ++t) {
    struct Cand {
      double score;
      std::size_t parent;
      int index;
      int state;
    };
    std::vector<Cand> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      int state = step(live[h].hyp, live[h].state);
      std::vector<std::pair<int, double>> dist = expand(live[h].hyp, state);
      std::sort(dist.begin(), dist.end(), [](const auto &a, const auto &b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      if (dist.size() > beam) dist.resize(beam);
      for (const auto &[idx, p] : dist) {
        if (p <= 0) continue;
        cands.push_back({live[h].hyp.score + std::log(p), h, idx, state});
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand &a, const Cand &b) { return a.score > b.score; });
    std::vector<Live> next;
    for (const Cand &c : cands) {
      if (next.size() >= beam) break;
      Hyp h = live[c.parent].hyp;
      h.score = c.score;
      h.out.push_back(c.index);
      if (advance(&h)) {
        finished.push_back(std::move(h));
      } else {
        next.push_back({std::move(h), c.state});
      }
    }
    live = std::move(next);
    if (!finished.empty()) {
      double best_done = finished.front().score;
      for (const Hyp &h : finished) best_done = std::max(best_done, h.score);
      double best_live = -INFINITY;
      for (const Live &l : live) best_live = std::max(best_live, l.hyp.score);
      if (best_done >= best_live) break;
    }
  }
  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hyp &a, const Hyp &b) { return a.score > b.score; });
  return finished;
}

}  // namespace

ParseResult NeuralParser::DecodeDirect(const AbstractedQuestion &q, std::size_t beam) const {
  Graph g;
  Encoded enc = EncodeGraph(&g, q.tokens);
  int V = tgt_vocab_.size();
  std::vector<std::string> extras;
  std::vector<int> copy_index;
  for (const std::string &s : q.tokens) {
    std::string m = CopyTarget(s);
    if (tgt_vocab_.Contains(m)) {
      copy_index.push_back(tgt_vocab_.Index(m));
    } else {
      auto it = std::find(extras.begin(), extras.end(), m);
      copy_index.push_back(V + static_cast<int>(it - extras.begin()));
      if (it == extras.end()) extras.push_back(m);
    }
  }
  int bos = tgt_vocab_.Index(kBos), eos = tgt_vocab_.Index(kEos);
  std::vector<DecState> states{InitialState(&g, enc)};
  auto step = [&](const Hyp &h, int state) {
    int prev = h.out.empty() ? bos : h.out.back();
    if (prev >= V) prev = Vocabulary::kUnk;
    states.push_back(DecoderStep(&g, enc, states[static_cast<std::size_t>(state + 1)],
                                 g.Lookup(w_.tgt_emb, prev)));
    return static_cast<int>(states.size()) - 2;
  };
  auto expand = [&](const Hyp &, int state) {
    const DecState &s = states[static_cast<std::size_t>(state + 1)];
    Eigen::VectorXd pv = MaskedSoftmax(g.value(s.logits).col(0), nullptr);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(V + static_cast<int>(extras.size()));
    double gate = s.gate >= 0 ? g.scalar(s.gate) : 1.0;
    p.head(V) = gate * pv;
    if (s.gate >= 0) {
      const Matrix &alpha = g.value(s.alpha);
      for (std::size_t i = 0; i < copy_index.size(); ++i) {
        p(copy_index[i]) += (1 - gate) * alpha(static_cast<Eigen::Index>(i), 0);
      }
    }
    std::vector<std::pair<int, double>> out;
    for (int i = 0; i < p.size(); ++i) {
      if (i == Vocabulary::kUnk || i == bos) continue;
      out.emplace_back(i, p(i));
    }
    return out;
  };
  auto advance = [&](Hyp *h) { return h->out.back() == eos; };
  auto done = RunBeam(beam, 2 * max_target_ + 10, Hyp{}, step, expand, advance);
  ParseResult r;
  if (done.empty()) {
    r.error = "BeamExhausted";
    return r;
  }
  std::vector<std::string> toks;
  for (std::size_t i = 0; i + 1 < done[0].out.size(); ++i) {
    int idx = done[0].out[i];
    toks.push_back(idx < V ? tgt_vocab_.Token(idx) : extras[static_cast<std::size_t>(idx - V)]);
  }
  r.raw = Join(toks, " ");
  r.score = done[0].score;
  try {
    r.lf = LfFromTokens(toks, system_.registry());
  } catch (const DataError &) {
    r.error = "Unparseable";
  }
  return r;
}

ParseResult NeuralParser::DecodeSketch(const AbstractedQuestion &q, std::size_t beam) const {
  Graph g;
  Encoded enc = EncodeGraph(&g, q.tokens);
  int bos = tgt_vocab_.Index(kBos), eos = tgt_vocab_.Index(kEos);
  std::vector<DecState> states{InitialState(&g, enc)};
  auto step = [&](const Hyp &h, int state) {
    int prev = h.out.empty() ? bos : h.out.back();
    states.push_back(DecoderStep(&g, enc, states[static_cast<std::size_t>(state + 1)],
                                 g.Lookup(w_.tgt_emb, prev)));
    return static_cast<int>(states.size()) - 2;
  };
  auto expand = [&](const Hyp &, int state) {
    Eigen::VectorXd p =
        MaskedSoftmax(g.value(states[static_cast<std::size_t>(state + 1)].logits).col(0), nullptr);
    std::vector<std::pair<int, double>> out;
    for (int i = 0; i < p.size(); ++i) {
      if (i == Vocabulary::kUnk || i == bos) continue;
      out.emplace_back(i, p(i));
    }
    return out;
  };
  auto advance = [&](Hyp *h) { return h->out.back() == eos; };
  auto done = RunBeam(beam, 2 * max_target_ + 10, Hyp{}, step, expand, advance);
  ParseResult r;
  if (done.empty()) {
    r.error = "BeamExhausted";
    return r;
  }
  std::vector<int> ids(done[0].out.begin(), done[0].out.end() - 1);
  std::vector<std::string> toks;
  std::vector<int> holes;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    toks.push_back(tgt_vocab_.Token(ids[i]));
    if (toks.back() == "@") holes.push_back(static_cast<int>(i));
  }
  r.raw = Join(toks, " ");
  r.score = done[0].score;
  try {
    LogicalForm sketch = LfFromTokens(toks, system_.registry(), {.allow_placeholders = true});
    auto slots = PlaceholderSlots(sketch, system_.registry());
    if (slots.size() != holes.size()) throw DataError("sketch slot count");
    std::vector<std::string> fine;
    if (!holes.empty()) {
      std::vector<Graph::Id> inputs, sk;
      for (int id : ids) inputs.push_back(g.Lookup(w_.tgt_emb, id));
      BiLstm(&g, inputs, "sk", &sk);
      auto logits = FineLogits(&g, enc.states, sk, holes, w_.fatt_w, w_.fcomb_w, w_.fcomb_b,
                               w_.fout_w, w_.fout_b, 0);
      for (std::size_t k = 0; k < logits.size(); ++k) {
        std::vector<int> valid;
        for (int i = 1; i < fine_vocab_.size(); ++i) {
          if (FitsSlot(fine_vocab_.Token(i), slots[k], system_.registry())) valid.push_back(i);
        }
        if (valid.empty()) throw DataError("no fine token fits");
        Eigen::VectorXd p = MaskedSoftmax(g.value(logits[k]).col(0), &valid);
        int best = valid[0];
        for (int i : valid) {
          if (p(i) > p(best)) best = i;
        }
        r.score += std::log(p(best));
        fine.push_back(fine_vocab_.Token(best));
      }
    }
    r.lf = FillSketch(sketch, fine, system_.registry());
    r.raw += " | " + Join(fine, " ");
  } catch (const DataError &) {
    r.error = "Unparseable";
  }
  return r;
}

ParseResult NeuralParser::DecodeGrammar(const AbstractedQuestion &q, std::size_t beam) const {
  Graph g;
  Encoded enc = EncodeGraph(&g, q.tokens);
  int bos = tgt_vocab_.Index(kBos);
  std::vector<DecState> states{InitialState(&g, enc)};
  auto step = [&](const Hyp &h, int state) {
    int prev = h.out.empty() ? bos : h.out.back();
    Graph::Id field = g.Lookup(w_.field_emb, field_vocab_.Index(h.deriv->FrontierField()));
    states.push_back(DecoderStep(&g, enc, states[static_cast<std::size_t>(state + 1)],
                                 g.Concat({g.Lookup(w_.tgt_emb, prev), field})));
    return static_cast<int>(states.size()) - 2;
  };
  auto expand = [&](const Hyp &h, int state) {
    std::vector<int> valid = ValidIndices(*h.deriv);
    Eigen::VectorXd p =
        MaskedSoftmax(g.value(states[static_cast<std::size_t>(state + 1)].logits).col(0), &valid);
    std::vector<std::pair<int, double>> out;
    for (int i : valid) out.emplace_back(i, p(i));
    return out;
  };
  auto advance = [&](Hyp *h) {
    h->deriv->Apply(Action::FromString(tgt_vocab_.Token(h->out.back())));
    return h->deriv->complete();
  };
  Hyp start;
  start.deriv.emplace(&system_);
  auto done = RunBeam(beam, 2 * max_target_ + 10, std::move(start), step, expand, advance);
  ParseResult r;
  if (done.empty()) {
    r.error = "BeamExhausted";
    return r;
  }
  r.raw = SerializeActions(done[0].deriv->actions());
  r.score = done[0].score;
  r.lf = system_.ActionsToLf(done[0].deriv->actions());
  return r;
}

std::vector<NeuralParser::StepTrace> NeuralParser::TraceGreedy(const AbstractedQuestion &q) const {
  Graph g;
  Encoded enc = EncodeGraph(&g, q.tokens);
  DecState st = InitialState(&g, enc);
  int prev = tgt_vocab_.Index(kBos);
  int eos = tgt_vocab_.Index(kEos);
  std::optional<Derivation> d;
  if (cfg_.mode == DecodeMode::kGrammar) d.emplace(&system_);
  std::vector<StepTrace> trace;
  for (std::size_t t = 0; t < 2 * max_target_ + 10; ++t) {
    Graph::Id input = g.Lookup(w_.tgt_emb, prev);
    if (d) input = g.Concat({input, g.Lookup(w_.field_emb, field_vocab_.Index(d->FrontierField()))});
    st = DecoderStep(&g, enc, st, input);
    StepTrace s;
    s.attention = g.value(st.alpha).col(0);
    if (d) {
      s.valid = ValidIndices(*d);
      s.probs = MaskedSoftmax(g.value(st.logits).col(0), &s.valid);
    } else {
      s.probs = MaskedSoftmax(g.value(st.logits).col(0), nullptr);
    }
    Eigen::Index best;
    s.probs.maxCoeff(&best);
    prev = static_cast<int>(best);
    trace.push_back(std::move(s));
    if (d) {
      if (trace.back().valid.empty()) break;
      d->Apply(Action::FromString(tgt_vocab_.Token(prev)));
      if (d->complete()) break;
    } else if (prev == eos) {
      break;
    }
  }
  return trace;
}

// ---- training ----

Matrix NeuralParser::Encode(const std::vector<std::string> &tokens) const {
  Graph g;
  Encoded enc = EncodeGraph(&g, tokens);
  return g.value(enc.states);
}

double NeuralParser::Loss(const Example &e) const {
  Graph g;
  return g.scalar(ItemLoss(&g, MakeItem(e)));
}

GradientCheckResult NeuralParser::GradientCheck(const Example &e, std::size_t samples,
                                                std::uint64_t seed, bool corrupt) {
  constexpr double kStep = 1e-5;
  constexpr double kFloor = 1e-4;
  Item item = MakeItem(e);
  params_.ZeroGrad();
  {
    Graph g;
    g.Backward(ItemLoss(&g, item));
  }
  struct Entry {
    Parameter *p;
    Eigen::Index i, j;
  };
  std::vector<Entry> pool;
  for (const auto &p : params_.all()) {
    bool table = p->name.size() > 4 && p->name.compare(p->name.size() - 4, 4, "_emb") == 0;
    for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
      if (table && p->grad.col(j).isZero(0)) continue;
      for (Eigen::Index i = 0; i < p->value.rows(); ++i) pool.push_back({p.get(), i, j});
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > samples) pool.resize(samples);
  GradientCheckResult res;
  auto loss = [&] {
    Graph g;
    return g.scalar(ItemLoss(&g, item));
  };
  for (const Entry &en : pool) {
    double analytic = en.p->grad(en.i, en.j);
    if (corrupt) analytic = analytic * 1.1 + 1e-3;
    double v = en.p->value(en.i, en.j);
    en.p->value(en.i, en.j) = v + kStep;
    double lp = loss();
    en.p->value(en.i, en.j) = v - kStep;
    double lm = loss();
    en.p->value(en.i, en.j) = v;
    double numeric = (lp - lm) / (2 * kStep);
    double err = 0;
    if (analytic != 0 || numeric != 0) {
      err = std::abs(analytic - numeric) /
            std::max({std::abs(analytic), std::abs(numeric), kFloor});
    }
    res.max_relative_error = std::max(res.max_relative_error, err);
    ++res.checked;
  }
  params_.ZeroGrad();
  return res;
}

std::unique_ptr<NeuralParser> NeuralParser::Initialize(const Dataset &data,
                                                       const TrainingConfig &cfg,
                                                       const PredicateRegistry &registry,
                                                       const std::vector<SequencePair> &pairs) {
  if (data.empty()) throw EmptyDataset("no training examples");
  cfg.Validate();
  std::unique_ptr<NeuralParser> p(new NeuralParser(cfg, registry));
  p->BuildVocabularies(data, cfg.mode == DecodeMode::kDirect ? pairs : std::vector<SequencePair>{});
  p->InitParameters();
  if (!cfg.embeddings.empty()) {
    EmbeddingTable t = LoadEmbeddings(cfg.embeddings, p->src_vocab_, cfg.embed, cfg.seed);
    p->w_.src_emb->value = t.vectors;
  }
  for (const Example &e : data) {
    std::vector<std::string> preds;
    CollectPredicates(e.gold, &preds);
    p->training_predicates.insert(preds.begin(), preds.end());
  }
  for (const std::string &t : p->src_vocab_.tokens()) {
    if (t != "<unk>") p->source_vocabulary.insert(t);
  }
  return p;
}

std::unique_ptr<NeuralParser> NeuralParser::Train(const Dataset &train, const Dataset &dev,
                                                  const TrainingConfig &cfg,
                                                  const PredicateRegistry &registry,
                                                  const std::vector<SequencePair> &pairs,
                                                  TrainingLog *log) {
  auto p = Initialize(train, cfg, registry, pairs);
  std::vector<Item> items;
  for (const Example &e : train) items.push_back(p->MakeItem(e));
  if (cfg.mode == DecodeMode::kDirect) {
    for (const SequencePair &sp : pairs) items.push_back(p->MakePairItem(sp));
  }
  TrainingLog local;
  if (!log) log = &local;
  *log = TrainingLog();
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = cfg.learning_rate;
  std::optional<std::vector<Matrix>> best;
  std::size_t since_best = 0;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t k : order) {
      ++step;
      Graph g(true, &rng);
      p->params_.ZeroGrad();
      Graph::Id loss = p->ItemLoss(&g, items[k]);
      double v = g.scalar(loss);
      if (!std::isfinite(v)) throw NonFiniteLoss(step);
      g.Backward(loss);
      double norm = p->params_.GradNorm();
      if (norm > cfg.clip_norm) p->params_.ScaleGrad(cfg.clip_norm / norm);
      p->params_.SgdStep(lr);
      total += v;
    }
    log->epoch_loss.push_back(total / static_cast<double>(items.size()));
    lr *= cfg.lr_decay;
    if (dev.empty() || epoch % cfg.validate_every != 0) continue;
    std::size_t correct = 0;
    for (const Example &e : dev) {
      ParseResult r = p->Parse(e.input);
      if (r.lf && ExactMatch(*r.lf, e.abstract_gold)) ++correct;
    }
    double acc = static_cast<double>(correct) / static_cast<double>(dev.size());
    log->dev_evals.emplace_back(epoch, acc);
    if (acc > log->best_dev) {
      log->best_dev = acc;
      log->best_epoch = epoch;
      best = p->params_.Snapshot();
      since_best = 0;
    } else {
      ++since_best;
    }
    if (acc >= 1.0 || (cfg.patience > 0 && since_best >= cfg.patience)) {
      log->early_stopped = epoch < cfg.max_epochs;
      break;
    }
  }
  if (best) p->params_.Restore(*best);
  p->best_dev_ = log->best_dev;
  return p;
}

// ---- checkpoints ----

Checkpoint NeuralParser::ToCheckpoint() const {
  Checkpoint ckpt;
  ckpt.header = {{"mode", mode()},
                 {"config", cfg_.ToJson()},
                 {"registry", system_.registry().ToText()},
                 {"grammar", system_.grammar().ToText()},
                 {"source_tokens", src_vocab_.tokens()},
                 {"target_tokens", tgt_vocab_.tokens()},
                 {"field_tokens", field_vocab_.tokens()},
                 {"fine_tokens", fine_vocab_.tokens()},
                 {"max_target", max_target_},
                 {"best_dev", best_dev_},
                 {"training_predicates", training_predicates},
                 {"source_vocabulary", source_vocabulary}};
  for (const auto &p : params_.all()) {
    const Matrix &m = p->value;
    ckpt.arrays.push_back({p->name, static_cast<std::size_t>(m.rows()),
                           static_cast<std::size_t>(m.cols()),
                           std::vector<double>(m.data(), m.data() + m.size())});
  }
  return ckpt;
}

void NeuralParser::Save(const std::string &path) const { SaveCheckpoint(path, ToCheckpoint()); }

std::unique_ptr<NeuralParser> NeuralParser::FromCheckpoint(const Checkpoint &ckpt) {
  try {
    TrainingConfig cfg = TrainingConfig::FromJson(ckpt.header.at("config"));
    PredicateRegistry registry = RegistryFromText(ckpt.header.at("registry").get<std::string>());
    std::unique_ptr<NeuralParser> p(new NeuralParser(cfg, registry));
    p->system_ = TransitionSystem(AsdlGrammar::Parse(ckpt.header.at("grammar").get<std::string>()),
                                  registry);
    auto vocab = [&](const char *key) {
      auto toks = ckpt.header.at(key).get<std::vector<std::string>>();
      if (toks.empty() || toks[0] != "<unk>") throw DataError(std::string("bad vocabulary ") + key);
      return Vocabulary(std::vector<std::string>(toks.begin() + 1, toks.end()));
    };
    p->src_vocab_ = vocab("source_tokens");
    p->tgt_vocab_ = vocab("target_tokens");
    p->field_vocab_ = vocab("field_tokens");
    p->fine_vocab_ = vocab("fine_tokens");
    p->max_target_ = ckpt.header.at("max_target").get<std::size_t>();
    p->best_dev_ = ckpt.header.value("best_dev", -1.0);
    p->InitParameters();
    for (const auto &param : p->params_.all()) {
      const NamedArray &a = ckpt.Array(param->name);
      if (a.rows != static_cast<std::size_t>(param->value.rows()) ||
          a.cols != static_cast<std::size_t>(param->value.cols())) {
        throw DataError("checkpoint array " + param->name + " has the wrong shape");
      }
      param->value = Eigen::Map<const Matrix>(a.data.data(), param->value.rows(),
                                              param->value.cols());
    }
    if (ckpt.arrays.size() != p->params_.all().size()) {
      throw DataError("checkpoint has unexpected arrays");
    }
    p->training_predicates = ckpt.header.value("training_predicates", std::set<std::string>{});
    p->source_vocabulary = ckpt.header.value("source_vocabulary", std::set<std::string>{});
    return p;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("neural checkpoint: ") + e.what());
  }
}

}  // namespace lambdaehr
