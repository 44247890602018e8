#include "lambdaehr/lexicon.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "lambdaehr/dataset.h"
#include "lambdaehr/text.h"

namespace lambdaehr {

std::string_view ArgTemplateName(ArgTemplate t) {
  switch (t) {
    case ArgTemplate::kForm: return "form";
    case ArgTemplate::kVar: return "var";
    case ArgTemplate::kConcept: return "concept";
    case ArgTemplate::kTemporalRef: return "temporal_ref";
    case ArgTemplate::kMeasurement: return "measurement";
  }
  return "?";
}

ArgTemplate ParseArgTemplate(std::string_view s) {
  for (ArgTemplate t : {ArgTemplate::kForm, ArgTemplate::kVar, ArgTemplate::kConcept,
                        ArgTemplate::kTemporalRef, ArgTemplate::kMeasurement}) {
    if (ArgTemplateName(t) == s) return t;
  }
  throw DataError("unknown argument template: " + std::string(s));
}

Lexicon Lexicon::WithDefaults() {
  Lexicon lex;
  lex.entries_.push_back({{"concept"}, "has_concept", ArgTemplate::kConcept});
  lex.entries_.push_back({{"temporal_ref"}, "time_within", ArgTemplate::kTemporalRef});
  lex.max_phrase_ = 1;
  return lex;
}

void Lexicon::Add(LexiconEntry entry, const PredicateRegistry &registry) {
  if (entry.phrase.empty()) throw DataError("lexicon: empty phrase for " + entry.predicate);
  const PredicateSignature *sig = registry.Find(entry.predicate);
  if (!sig) throw UnknownPredicate(entry.predicate);
  std::size_t want = entry.arg == ArgTemplate::kForm || entry.arg == ArgTemplate::kVar ? 1 : 2;
  if (sig->arity() != want) {
    throw DataError("lexicon: " + entry.predicate + " cannot take a " +
                    std::string(ArgTemplateName(entry.arg)) + " argument");
  }
  if (std::find(entries_.begin(), entries_.end(), entry) != entries_.end()) return;
  max_phrase_ = std::max(max_phrase_, entry.phrase.size());
  entries_.push_back(std::move(entry));
}

Lexicon Lexicon::Parse(std::string_view text, const PredicateRegistry &registry) {
  Lexicon lex;
  std::size_t line_no = 0;
  for (const std::string &line : Split(text, '\n')) {
    ++line_no;
    std::string_view t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> cols = Split(t, '\t');
    if (cols.size() != 3) {
      throw DataError("lexicon line " + std::to_string(line_no) +
                      ": expected phrase<TAB>predicate<TAB>arg_template");
    }
    try {
      lex.Add({SplitWhitespace(cols[0]), std::string(Trim(cols[1])),
               ParseArgTemplate(Trim(cols[2]))},
              registry);
    } catch (const DataError &e) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return lex;
}

Lexicon Lexicon::LoadFile(const std::string &path, const PredicateRegistry &registry) {
  return Parse(ReadFile(path), registry);
}

std::vector<const LexiconEntry *> Lexicon::LongestMatch(const std::vector<std::string> &tokens,
                                                        std::size_t start) const {
  std::vector<const LexiconEntry *> out;
  if (start >= tokens.size()) return out;
  for (std::size_t len = std::min(max_phrase_, tokens.size() - start); len > 0; --len) {
    for (const LexiconEntry &e : entries_) {
      if (e.phrase.size() == len &&
          std::equal(e.phrase.begin(), e.phrase.end(), tokens.begin() + start)) {
        out.push_back(&e);
      }
    }
    if (!out.empty()) return out;
  }
  return out;
}

std::string Lexicon::ToText() const {
  std::string out;
  for (const LexiconEntry &e : entries_) {
    out += Join(e.phrase, " ") + "\t" + e.predicate + "\t" +
           std::string(ArgTemplateName(e.arg)) + "\n";
  }
  return out;
}

namespace {

constexpr std::size_t kMaxOptional = 10;
constexpr std::size_t kMaxOperators = 6;

std::size_t KindIndex(EntityKind k) { return static_cast<std::size_t>(k); }

LogicalForm Conjunct(const LexiconEntry &e) {
  LogicalForm x = LogicalForm::Var("x");
  switch (e.arg) {
    case ArgTemplate::kConcept:
      return LogicalForm::Apply(e.predicate, {x, PlaceholderArgument(EntityKind::kConcept)});
    case ArgTemplate::kTemporalRef:
      return LogicalForm::Apply(e.predicate, {x, PlaceholderArgument(EntityKind::kTemporalRef)});
    case ArgTemplate::kMeasurement:
      return LogicalForm::Apply(e.predicate, {x, PlaceholderArgument(EntityKind::kMeasurement)});
    default:
      return LogicalForm::Apply(e.predicate, {x});
  }
}

// Placeholder arguments of each kind in a candidate.
std::array<std::size_t, 4> ConsumedPlaceholders(const LogicalForm &lf) {
  std::array<std::size_t, 4> n{};
  auto walk = [&](auto &&self, const LogicalForm &f) -> void {
    if (f.Is(NodeKind::kConceptRef) && f.text() == "concept") ++n[KindIndex(EntityKind::kConcept)];
    if (f.Is(NodeKind::kLiteral)) {
      if (f.text() == "measurement") ++n[KindIndex(EntityKind::kMeasurement)];
      if (f.text() == "temporal_ref") ++n[KindIndex(EntityKind::kTemporalRef)];
    }
    for (const LogicalForm &c : f.children()) self(self, c);
  };
  walk(walk, lf);
  return n;
}

}  // namespace

CandidateSet GenerateCandidates(const AbstractedQuestion &q, const Lexicon &lexicon,
                                const PredicateRegistry &registry, std::size_t depth_limit) {
  if (depth_limit < 1) throw DataError("depth limit must be at least 1");
  CandidateSet set;
  set.token_count = q.tokens.size();
  for (const std::string &t : q.tokens) {
    if (auto k = PlaceholderKind(t)) ++set.placeholders[KindIndex(*k)];
  }
  for (std::size_t i = 0; i < q.tokens.size();) {
    std::vector<const LexiconEntry *> m = lexicon.LongestMatch(q.tokens, i);
    if (m.empty()) {
      ++i;
      continue;
    }
    for (const LexiconEntry *e : m) set.fired.push_back({*e, i, e->phrase.size()});
    i += m.front()->phrase.size();
  }

  // Conjunct sources; one representative fired index per distinct entry.
  std::vector<std::size_t> required, optional_var, optional_cmp, operators;
  std::map<std::string, std::size_t> first_seen;
  std::vector<std::size_t> temporal;
  for (std::size_t i = 0; i < set.fired.size(); ++i) {
    const LexiconEntry &e = set.fired[i].entry;
    switch (e.arg) {
      case ArgTemplate::kConcept: required.push_back(i); break;
      case ArgTemplate::kTemporalRef: temporal.push_back(i); break;
      case ArgTemplate::kMeasurement: optional_cmp.push_back(i); break;
      case ArgTemplate::kVar:
        if (first_seen.emplace(e.predicate + "/var", i).second) optional_var.push_back(i);
        break;
      case ArgTemplate::kForm:
        if (first_seen.emplace(e.predicate + "/form", i).second) operators.push_back(i);
        break;
    }
  }
  std::vector<std::size_t> optional = optional_var;
  optional.insert(optional.end(), optional_cmp.begin(), optional_cmp.end());
  if (optional.size() > kMaxOptional) optional.resize(kMaxOptional);
  if (operators.size() > kMaxOperators) operators.resize(kMaxOperators);
  const std::size_t measurements = set.placeholders[KindIndex(EntityKind::kMeasurement)];

  struct Core {
    LogicalForm lf;
    std::vector<std::size_t> used;
  };
  std::vector<Core> cores;
  for (std::size_t mask = 0; mask < (std::size_t{1} << optional.size()); ++mask) {
    std::vector<std::size_t> used = required;
    std::size_t comparisons = 0;
    for (std::size_t b = 0; b < optional.size(); ++b) {
      if (!(mask >> b & 1)) continue;
      used.push_back(optional[b]);
      if (set.fired[optional[b]].entry.arg == ArgTemplate::kMeasurement) ++comparisons;
    }
    if (comparisons > measurements) continue;
    used.insert(used.end(), temporal.begin(), temporal.end());
    if (used.empty()) continue;
    std::vector<LogicalForm> conjuncts;
    for (std::size_t i : used) conjuncts.push_back(Conjunct(set.fired[i].entry));
    cores.push_back({LogicalForm::Lambda("x", LogicalForm::And(std::move(conjuncts))), used});
  }

  // Operator chains: outermost first, every inner operator set-valued.
  std::vector<std::vector<std::size_t>> chains = {{}};
  std::vector<std::size_t> chain;
  auto extend = [&](auto &&self) -> void {
    if (chain.size() == depth_limit) return;
    for (std::size_t op : operators) {
      if (std::find(chain.begin(), chain.end(), op) != chain.end()) continue;
      if (!chain.empty()) {
        const PredicateSignature *sig = registry.Find(set.fired[op].entry.predicate);
        if (sig->category != ResultCategory::kSet) continue;
      }
      chain.push_back(op);
      chains.push_back(chain);
      self(self);
      chain.pop_back();
    }
  };
  extend(extend);

  std::set<std::string> seen;
  for (const Core &core : cores) {
    for (const std::vector<std::size_t> &ops : chains) {
      LogicalForm lf = core.lf;
      for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        lf = LogicalForm::Apply(set.fired[*it].entry.predicate, {lf});
      }
      try {
        ValidateLf(lf, registry);
      } catch (const DataError &) {
        continue;
      }
      if (!seen.insert(PrintLf(lf)).second) continue;
      Candidate c{lf, core.used, ops.size()};
      c.used.insert(c.used.end(), ops.begin(), ops.end());
      std::sort(c.used.begin(), c.used.end());
      set.candidates.push_back(std::move(c));
    }
  }
  return set;
}

FeatureSpace::FeatureSpace(const PredicateRegistry &registry) {
  labels_ = registry.Names();
  std::sort(labels_.begin(), labels_.end());
  labels_.push_back("λx");
  names_ = {"coverage", "used", "unused", "predicates", "depth"};
  for (const std::string &l : labels_) names_.push_back("label=" + l);
  for (EntityKind k : {EntityKind::kConcept, EntityKind::kTemporalRef, EntityKind::kMeasurement}) {
    names_.push_back("unconsumed=" + std::string(EntityKindName(k)));
  }
}

std::vector<double> FeatureSpace::Extract(const CandidateSet &set, const Candidate &c) const {
  std::vector<double> f(names_.size(), 0.0);
  std::set<std::size_t> covered_tokens;
  std::set<std::size_t> used(c.used.begin(), c.used.end());
  // An entry fired alongside a used entry on the same phrase counts as used.
  std::set<std::size_t> used_spans;
  for (std::size_t i : used) used_spans.insert(set.fired[i].start);
  std::size_t unused = 0;
  for (std::size_t i = 0; i < set.fired.size(); ++i) {
    const FiredEntry &fe = set.fired[i];
    if (used_spans.count(fe.start)) {
      for (std::size_t t = fe.start; t < fe.start + fe.length; ++t) covered_tokens.insert(t);
    } else {
      ++unused;
    }
  }
  f[0] = set.token_count ? static_cast<double>(covered_tokens.size()) /
                               static_cast<double>(set.token_count)
                         : 0.0;
  f[1] = static_cast<double>(used.size());
  f[2] = static_cast<double>(unused);
  f[3] = static_cast<double>(CountPredicates(c.lf));
  f[4] = static_cast<double>(c.depth);
  std::string label = OutermostLabel(c.lf);
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it != labels_.end()) f[5 + static_cast<std::size_t>(it - labels_.begin())] = 1.0;
  std::array<std::size_t, 4> consumed = ConsumedPlaceholders(c.lf);
  std::size_t base = 5 + labels_.size();
  std::size_t j = 0;
  for (EntityKind k : {EntityKind::kConcept, EntityKind::kTemporalRef, EntityKind::kMeasurement}) {
    if (consumed[KindIndex(k)] < set.placeholders[KindIndex(k)]) f[base + j] = 1.0;
    ++j;
  }
  return f;
}

double Score(const std::vector<double> &features, const std::vector<double> &weights) {
  return std::inner_product(features.begin(), features.end(), weights.begin(), 0.0);
}

namespace {

std::size_t SelectIndex(const CandidateSet &set, const std::vector<std::vector<double>> &feats,
                        const std::vector<double> &weights) {
  if (set.candidates.empty()) throw NoCandidates("no candidate logical forms");
  std::size_t best = 0;
  double best_score = Score(feats[0], weights);
  std::size_t best_preds = CountPredicates(set.candidates[0].lf);
  std::string best_text = PrintLf(set.candidates[0].lf);
  for (std::size_t i = 1; i < set.candidates.size(); ++i) {
    double s = Score(feats[i], weights);
    std::size_t preds = CountPredicates(set.candidates[i].lf);
    std::string text = PrintLf(set.candidates[i].lf);
    bool better = s > best_score ||
                  (s == best_score &&
                   (preds < best_preds || (preds == best_preds && text < best_text)));
    if (better) {
      best = i;
      best_score = s;
      best_preds = preds;
      best_text = std::move(text);
    }
  }
  return best;
}

std::vector<std::vector<double>> ExtractAll(const CandidateSet &set, const FeatureSpace &space) {
  std::vector<std::vector<double>> out;
  out.reserve(set.candidates.size());
  for (const Candidate &c : set.candidates) out.push_back(space.Extract(set, c));
  return out;
}

}  // namespace

const Candidate &Select(const CandidateSet &set, const FeatureSpace &space,
                        const std::vector<double> &weights) {
  return set.candidates[SelectIndex(set, ExtractAll(set, space), weights)];
}

RankerResult TrainRanker(const Dataset &data, const Lexicon &lexicon,
                         const PredicateRegistry &registry, const RankerOptions &options) {
  if (data.empty()) throw EmptyDataset("cannot train a ranker on an empty dataset");
  FeatureSpace space(registry);
  struct Item {
    CandidateSet set;
    std::vector<std::vector<double>> feats;
    std::optional<std::size_t> gold;
  };
  std::vector<Item> items;
  std::size_t covered = 0;
  for (const Example &e : data) {
    Item it{GenerateCandidates(e.input, lexicon, registry, options.depth_limit), {}, {}};
    it.feats = ExtractAll(it.set, space);
    std::string gold = PrintLf(e.abstract_gold);
    for (std::size_t i = 0; i < it.set.candidates.size(); ++i) {
      if (PrintLf(it.set.candidates[i].lf) == gold) it.gold = i;
    }
    if (it.gold) ++covered;
    items.push_back(std::move(it));
  }

  RankerResult result;
  result.weights.assign(space.size(), 0.0);
  std::vector<double> &w = result.weights;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Item &it = items[idx];
      if (!it.gold) continue;
      const std::vector<double> &fg = it.feats[*it.gold];
      std::vector<double> grad(w.size(), 0.0);
      for (std::size_t j = 0; j < it.feats.size(); ++j) {
        if (j == *it.gold) continue;
        double margin = Score(fg, w) - Score(it.feats[j], w);
        if (margin < options.margin) {
          for (std::size_t d = 0; d < w.size(); ++d) grad[d] += fg[d] - it.feats[j][d];
        }
      }
      for (std::size_t d = 0; d < w.size(); ++d) {
        w[d] = w[d] * (1.0 - options.learning_rate * options.l2) +
               options.learning_rate * grad[d];
      }
    }
  }

  std::size_t correct = 0;
  for (const Item &it : items) {
    if (it.gold && !it.set.no_candidates() && SelectIndex(it.set, it.feats, w) == *it.gold) {
      ++correct;
    }
  }
  result.oracle_coverage = static_cast<double>(covered) / static_cast<double>(data.size());
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return result;
}

LexiconParser::LexiconParser(PredicateRegistry registry, Lexicon lexicon,
                             std::vector<double> weights, std::size_t depth_limit)
    : registry_(std::move(registry)),
      lexicon_(std::move(lexicon)),
      weights_(std::move(weights)),
      depth_limit_(depth_limit),
      space_(registry_) {
  if (weights_.size() != space_.size()) {
    throw DataError("lexicon parser: expected " + std::to_string(space_.size()) +
                    " weights, got " + std::to_string(weights_.size()));
  }
}

ParseResult LexiconParser::Parse(const AbstractedQuestion &q) const {
  ParseResult r;
  CandidateSet set = GenerateCandidates(q, lexicon_, registry_, depth_limit_);
  if (set.no_candidates()) {
    r.error = "NoCandidates";
    return r;
  }
  std::vector<std::vector<double>> feats = ExtractAll(set, space_);
  std::size_t best = SelectIndex(set, feats, weights_);
  r.lf = set.candidates[best].lf;
  r.raw = PrintLf(*r.lf);
  r.score = Score(feats[best], weights_);
  return r;
}

void LexiconParser::Save(const std::string &path) const {
  Checkpoint ckpt;
  ckpt.header = {{"mode", mode()},
                 {"registry", registry_.ToText()},
                 {"lexicon", lexicon_.ToText()},
                 {"depth_limit", depth_limit_},
                 {"features", space_.names()},
                 {"training_predicates", training_predicates},
                 {"source_vocabulary", source_vocabulary}};
  ckpt.arrays.push_back({"weights", weights_.size(), 1, weights_});
  SaveCheckpoint(path, ckpt);
}

std::unique_ptr<LexiconParser> LexiconParser::FromCheckpoint(const Checkpoint &ckpt) {
  try {
    PredicateRegistry registry = RegistryFromText(ckpt.header.at("registry").get<std::string>());
    Lexicon lex = Lexicon::Parse(ckpt.header.at("lexicon").get<std::string>(), registry);
    auto p = std::make_unique<LexiconParser>(registry, std::move(lex),
                                             ckpt.Array("weights").data,
                                             ckpt.header.at("depth_limit").get<std::size_t>());
    p->training_predicates = ckpt.header.value("training_predicates", std::set<std::string>{});
    p->source_vocabulary = ckpt.header.value("source_vocabulary", std::set<std::string>{});
    return p;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("lexicon checkpoint: ") + e.what());
  }
}

}  // namespace lambdaehr
