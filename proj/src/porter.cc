// Porter, "An algorithm for suffix stripping", Program 14(3), 1980.
//
// Rule lists are tried in order and only the first matching suffix is
// considered, whether or not its condition holds.

#include <array>
#include <string>
#include <string_view>

#include "lambdaehr/preprocess.h"

namespace lambdaehr {
namespace {

class Stemmer {
 public:
  explicit Stemmer(std::string_view word) : b_(word) {}

  std::string Run() {
    if (b_.size() <= 2) return b_;
    Step1a();
    Step1b();
    Step1c();
    Step2();
    Step3();
    Step4();
    Step5a();
    Step5b();
    return b_;
  }

 private:
  struct Rule {
    std::string_view suffix;
    std::string_view replacement;
  };

  bool IsConsonant(std::size_t i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !IsConsonant(i - 1);
      default:
        return true;
    }
  }

  // m in [C](VC){m}[V] over the first `len` letters.
  int Measure(std::size_t len) const {
    int m = 0;
    std::size_t i = 0;
    while (i < len && IsConsonant(i)) ++i;
    while (i < len) {
      while (i < len && !IsConsonant(i)) ++i;
      if (i >= len) break;
      while (i < len && IsConsonant(i)) ++i;
      ++m;
    }
    return m;
  }

  bool HasVowel(std::size_t len) const {
    for (std::size_t i = 0; i < len; ++i) {
      if (!IsConsonant(i)) return true;
    }
    return false;
  }

  bool EndsDoubleConsonant(std::size_t len) const {
    return len >= 2 && b_[len - 1] == b_[len - 2] && IsConsonant(len - 1);
  }

  // *o: stem ends cvc, where the final c is not w, x or y.
  bool EndsCvc(std::size_t len) const {
    if (len < 3) return false;
    if (!IsConsonant(len - 1) || IsConsonant(len - 2) ||
        !IsConsonant(len - 3)) {
      return false;
    }
    char c = b_[len - 1];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool EndsWith(std::string_view suffix) const {
    return b_.size() >= suffix.size() &&
           std::string_view(b_).substr(b_.size() - suffix.size()) == suffix;
  }

  std::size_t StemLength(std::string_view suffix) const {
    return b_.size() - suffix.size();
  }

  void Replace(std::string_view suffix, std::string_view replacement) {
    b_.resize(StemLength(suffix));
    b_.append(replacement);
  }

  template <std::size_t N>
  void ApplyMeasureRules(const std::array<Rule, N> &rules, int min_measure) {
    for (const Rule &r : rules) {
      if (!EndsWith(r.suffix)) continue;
      if (Measure(StemLength(r.suffix)) > min_measure) {
        Replace(r.suffix, r.replacement);
      }
      return;
    }
  }

  void Step1a() {
    if (EndsWith("sses")) {
      Replace("sses", "ss");
    } else if (EndsWith("ies")) {
      Replace("ies", "i");
    } else if (EndsWith("ss")) {
      // unchanged
    } else if (EndsWith("s")) {
      Replace("s", "");
    }
  }

  void Step1b() {
    if (EndsWith("eed")) {
      if (Measure(StemLength("eed")) > 0) Replace("eed", "ee");
      return;
    }
    bool stripped = false;
    if (EndsWith("ed") && HasVowel(StemLength("ed"))) {
      Replace("ed", "");
      stripped = true;
    } else if (EndsWith("ing") && HasVowel(StemLength("ing"))) {
      Replace("ing", "");
      stripped = true;
    }
    if (!stripped) return;
    if (EndsWith("at")) {
      Replace("at", "ate");
    } else if (EndsWith("bl")) {
      Replace("bl", "ble");
    } else if (EndsWith("iz")) {
      Replace("iz", "ize");
    } else if (EndsDoubleConsonant(b_.size())) {
      char c = b_.back();
      if (c != 'l' && c != 's' && c != 'z') b_.pop_back();
    } else if (Measure(b_.size()) == 1 && EndsCvc(b_.size())) {
      b_.push_back('e');
    }
  }

  void Step1c() {
    if (EndsWith("y") && HasVowel(StemLength("y"))) Replace("y", "i");
  }

  void Step2() {
    static constexpr std::array<Rule, 20> kRules = {{
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},
        {"anci", "ance"},   {"izer", "ize"},    {"abli", "able"},
        {"alli", "al"},     {"entli", "ent"},   {"eli", "e"},
        {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"},
        {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},
        {"iviti", "ive"},   {"biliti", "ble"},
    }};
    ApplyMeasureRules(kRules, 0);
  }

  void Step3() {
    static constexpr std::array<Rule, 7> kRules = {{
        {"icate", "ic"},
        {"ative", ""},
        {"alize", "al"},
        {"iciti", "ic"},
        {"ical", "ic"},
        {"ful", ""},
        {"ness", ""},
    }};
    ApplyMeasureRules(kRules, 0);
  }

  void Step4() {
    static constexpr std::array<std::string_view, 19> kSuffixes = {
        "al",  "ance", "ence", "er",  "ic",  "able", "ible",
        "ant", "ement", "ment", "ent", "ion", "ou",  "ism",
        "ate", "iti",  "ous",  "ive", "ize",
    };
    for (std::string_view s : kSuffixes) {
      if (!EndsWith(s)) continue;
      std::size_t len = StemLength(s);
      if (Measure(len) <= 1) return;
      if (s == "ion" && !(len > 0 && (b_[len - 1] == 's' || b_[len - 1] == 't'))) {
        return;
      }
      b_.resize(len);
      return;
    }
  }

  void Step5a() {
    if (!EndsWith("e")) return;
    std::size_t len = StemLength("e");
    int m = Measure(len);
    if (m > 1 || (m == 1 && !EndsCvc(len))) b_.pop_back();
  }

  void Step5b() {
    if (Measure(b_.size()) > 1 && EndsDoubleConsonant(b_.size()) &&
        b_.back() == 'l') {
      b_.pop_back();
    }
  }

  std::string b_;
};

}  // namespace

std::string PorterStem(std::string_view word) { return Stemmer(word).Run(); }

}  // namespace lambdaehr
