#include "lambdaehr/parser.h"

#include <cstring>
#include <sstream>

#include "lambdaehr/lexicon.h"
#include "lambdaehr/neural.h"
#include "lambdaehr/text.h"

namespace lambdaehr {

namespace {

constexpr char kMagic[8] = {'L', 'E', 'H', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void PutRaw(std::string *out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out->append(buf, sizeof(T));
}

template <typename T>
T GetRaw(std::string_view bytes, std::size_t *pos, const std::string &source) {
  if (*pos + sizeof(T) > bytes.size()) throw DataError(source + ": truncated checkpoint");
  T v;
  std::memcpy(&v, bytes.data() + *pos, sizeof(T));
  *pos += sizeof(T);
  return v;
}

}  // namespace

const NamedArray &Checkpoint::Array(const std::string &name) const {
  for (const NamedArray &a : arrays) {
    if (a.name == name) return a;
  }
  throw DataError("checkpoint has no array named " + name);
}

std::string SerializeCheckpoint(const Checkpoint &ckpt) {
  nlohmann::json header = ckpt.header;
  nlohmann::json shapes = nlohmann::json::array();
  for (const NamedArray &a : ckpt.arrays) {
    if (a.data.size() != a.rows * a.cols) throw Error("array " + a.name + " has the wrong size");
    shapes.push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}});
  }
  header["arrays"] = shapes;
  std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  PutRaw<std::uint32_t>(&out, Checkpoint::kVersion);
  PutRaw<std::uint64_t>(&out, text.size());
  out += text;
  for (const NamedArray &a : ckpt.arrays) {
    for (double v : a.data) PutRaw<double>(&out, v);
  }
  return out;
}

Checkpoint DeserializeCheckpoint(std::string_view bytes, const std::string &source) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError(source + ": not a checkpoint");
  }
  std::size_t pos = sizeof kMagic;
  auto version = GetRaw<std::uint32_t>(bytes, &pos, source);
  if (version != Checkpoint::kVersion) {
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  auto len = GetRaw<std::uint64_t>(bytes, &pos, source);
  if (pos + len > bytes.size()) throw DataError(source + ": truncated checkpoint");
  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(bytes.substr(pos, len));
    pos += len;
    for (const auto &shape : ckpt.header.at("arrays")) {
      NamedArray a{shape.at("name").get<std::string>(), shape.at("rows").get<std::size_t>(),
                   shape.at("cols").get<std::size_t>(), {}};
      a.data.resize(a.rows * a.cols);
      for (double &v : a.data) v = GetRaw<double>(bytes, &pos, source);
      ckpt.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception &e) {
    throw DataError(source + ": bad checkpoint header: " + e.what());
  }
  if (pos != bytes.size()) throw DataError(source + ": trailing bytes in checkpoint");
  ckpt.header.erase("arrays");
  return ckpt;
}

void SaveCheckpoint(const std::string &path, const Checkpoint &ckpt) {
  WriteFile(path, SerializeCheckpoint(ckpt));
}

Checkpoint LoadCheckpoint(const std::string &path) {
  return DeserializeCheckpoint(ReadFile(path), path);
}

PredicateRegistry RegistryFromText(const std::string &text) {
  std::istringstream in(text);
  return PredicateRegistry::Load(in, "<checkpoint registry>");
}

std::optional<LogicalForm> ParseQuestion(const Parser &parser, const AbstractedQuestion &q,
                                         ParseResult *detail) {
  ParseResult r = parser.Parse(q);
  std::optional<LogicalForm> out;
  if (r.lf) out = AttachLfEntities(*r.lf, q.entities);
  if (detail) *detail = std::move(r);
  return out;
}

std::unique_ptr<Parser> LoadParser(const std::string &path) {
  Checkpoint ckpt = LoadCheckpoint(path);
  std::string mode = ckpt.header.value("mode", std::string());
  if (mode == "lexicon") return LexiconParser::FromCheckpoint(ckpt);
  if (mode == "direct" || mode == "sketch" || mode == "grammar") {
    return NeuralParser::FromCheckpoint(ckpt);
  }
  throw DataError(path + ": unknown parser mode '" + mode + "'");
}

}  // namespace lambdaehr
