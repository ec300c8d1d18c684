#include "cotalk/mock_rules.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <set>

#include "cotalk/error.hpp"
#include "cotalk/text.hpp"

namespace cotalk::gateway::mock {

using semantic::AttributeKind;
using semantic::SemanticUnit;

namespace {

using Tokens = std::vector<std::string>;
using Lexicon = std::set<std::string, std::less<>>;

const Lexicon kColours{"black",  "white",   "red",      "green",  "blue",   "yellow",
                       "gray",   "grey",    "brown",    "orange", "purple", "pink",
                       "silver", "golden",  "beige",    "tan",    "cyan",   "turquoise",
                       "maroon", "navy",    "greenish", "reddish", "bluish", "grayish",
                       "greyish", "whitish", "yellowish", "brownish"};
const Lexicon kShades{"dark", "light", "bright", "pale", "deep"};
const Lexicon kAmounts{"one",    "two",     "three",   "four",     "five",     "six",
                       "seven",  "eight",   "nine",    "ten",      "eleven",   "twelve",
                       "some",   "several", "many",    "few",      "multiple", "numerous",
                       "various", "both",   "dozens",  "countless", "single",  "hundreds"};
const Lexicon kSizes{"large", "small",  "big",     "tiny",  "huge",     "long",
                     "short", "tall",   "wide",    "narrow", "little",  "massive",
                     "giant", "medium", "medium-sized", "enormous", "large-scale", "small-scale"};
const Lexicon kShapes{"round",    "square",    "rectangular", "circular",    "triangular",
                      "curved",   "straight",  "oval",        "l-shaped",    "irregular",
                      "elongated", "cylindrical", "winding"};
const Lexicon kMaterials{"wooden", "metal", "metallic", "concrete", "glass", "brick",
                         "stone",  "plastic", "asphalt", "steel",   "paved", "dirt",
                         "sandy",  "grassy"};
const Lexicon kOther{"visible",  "appears",   "appear",  "parked",   "moored",   "docked",
                     "empty",    "busy",      "crowded", "scattered", "covered", "lined",
                     "running",  "moving",    "flowing", "calm",     "dense",    "sparse",
                     "bare",     "open",      "closed",  "clear",    "old",      "new",
                     "modern",   "aerial",    "densely", "neatly",   "arranged", "standing",
                     "sitting",  "lying",     "growing", "driving",  "dark",     "light",
                     "bright",   "shiny",     "surrounded"};
const Lexicon kStop{"is",      "are",      "was",       "were",    "be",       "been",
                    "being",   "has",      "have",      "had",     "there",    "here",
                    "it",      "its",      "it's",      "this",    "that",     "these",
                    "those",   "they",     "them",      "their",   "which",    "who",
                    "whose",   "also",     "can",       "could",   "may",      "might",
                    "will",    "would",    "should",    "seen",    "see",      "shows",
                    "show",    "showing",  "contains",  "containing", "contain", "include",
                    "includes", "including", "of",      "on",      "in",       "at",
                    "by",      "to",       "from",      "for",     "into",     "onto",
                    "as",      "image",    "picture",   "scene",   "photo",    "photograph",
                    "view",    "very",     "quite",     "located", "situated", "features",
                    "featuring", "depicts", "depicting", "not",    "no",       "a",
                    "an",      "the",      "each",      "all",     "other",    "another",
                    "just",    "only",     "too",       "up",      "out",      "then",
                    "furthermore", "next", "sits",      "stands",  "lies",     "looks",
                    "look",    "looking",  "like",      "such",    "so",       "overall",
                    "clearly", "mostly",   "partly",    "slightly", "fairly",  "relatively"};
const Lexicon kBoundaries{",", ".", ";", ":", "!", "?", "with", "and", "while", "where", "but", "or"};
const Lexicon kPositions{"upper",      "lower",       "top",         "bottom",      "left",
                         "right",      "middle",      "center",      "centre",      "central",
                         "far",        "upper-left",  "upper-right", "lower-left",  "lower-right",
                         "top-left",   "top-right",   "bottom-left", "bottom-right", "foreground",
                         "background"};
const Lexicon kAreaNouns{"corner", "area", "part", "side", "region", "edge", "half",
                         "portion", "section", "quadrant"};
const Lexicon kImageWords{"image", "picture", "scene", "photo", "photograph", "frame", "view"};
const Lexicon kLocationPreps{"in", "at", "on"};

const std::vector<Tokens> kAmountPhrases = [] {
  std::vector<Tokens> v;
  for (const char* p :
       {"a patch of", "a row of", "a group of", "a line of", "a cluster of", "a column of",
        "a pair of", "a lot of", "lots of", "a couple of", "a few", "rows of", "a number of",
        "a variety of", "a series of", "a stretch of", "a strip of", "a pile of", "a fleet of",
        "a set of", "groups of", "clusters of", "a large number of", "a small number of"}) {
    v.push_back(text::split_words(p));
  }
  std::sort(v.begin(), v.end(), [](const Tokens& a, const Tokens& b) { return a.size() > b.size(); });
  return v;
}();

const std::vector<Tokens> kRelativeCues = [] {
  std::vector<Tokens> v;
  for (const char* p :
       {"to the left of", "to the right of", "on the left of", "on the right of", "left of",
        "right of", "next to", "beside", "near", "behind", "in front of", "above", "below",
        "under", "underneath", "beneath", "along", "alongside", "across", "around", "between",
        "among", "inside", "outside", "on top of", "adjacent to", "close to", "opposite",
        "over", "beyond", "facing", "surrounding", "surrounded by", "toward", "towards"}) {
    v.push_back(text::split_words(p));
  }
  std::sort(v.begin(), v.end(), [](const Tokens& a, const Tokens& b) { return a.size() > b.size(); });
  return v;
}();

bool has(const Lexicon& lex, std::string_view w) { return lex.find(w) != lex.end(); }

bool is_number(std::string_view w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
}

Tokens tokenize(std::string_view raw) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text::to_lower(raw)) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (ch == ',' || ch == '.' || ch == ';' || ch == ':' || ch == '!' || ch == '?') {
      flush();
      out.emplace_back(1, ch);
    } else if (ch == '"' || ch == '(' || ch == ')') {
      flush();
    } else {
      cur += ch;
    }
  }
  flush();
  return out;
}

bool matches_at(const Tokens& toks, std::size_t i, const Tokens& phrase) {
  if (i + phrase.size() > toks.size()) return false;
  return std::equal(phrase.begin(), phrase.end(), toks.begin() + static_cast<std::ptrdiff_t>(i));
}

std::optional<std::size_t> match_any(const Tokens& toks, std::size_t i,
                                     const std::vector<Tokens>& phrases) {
  for (const Tokens& p : phrases) {
    if (matches_at(toks, i, p)) return p.size();
  }
  return std::nullopt;
}

struct Modifier {
  AttributeKind kind;
  std::string value;
};

class Extractor {
 public:
  explicit Extractor(const Tokens& toks) : toks_(toks) {}

  std::vector<SemanticUnit> run() {
    std::size_t i = 0;
    while (i < toks_.size()) i = step(i);
    end_sentence();
    return std::move(units_);
  }

 private:
  std::size_t step(std::size_t i) {
    const std::string& w = toks_[i];
    if (w == "." || w == "!" || w == "?") {
      end_sentence();
      return i + 1;
    }
    if (has(kBoundaries, w)) {
      boundary();
      return i + 1;
    }
    if (auto n = match_any(toks_, i, kRelativeCues)) {
      flush_run();
      return consume_relative(i, i + *n);
    }
    if (auto n = absolute_location(i)) return *n;
    if (auto n = match_any(toks_, i, kAmountPhrases)) {
      flush_run();
      pending_.push_back({AttributeKind::amount, joined(i, i + *n)});
      return i + *n;
    }
    if (has(kShades, w) && i + 1 < toks_.size() && has(kColours, toks_[i + 1])) {
      flush_run();
      pending_.push_back({AttributeKind::colour, w + " " + toks_[i + 1]});
      return i + 2;
    }
    if (auto kind = modifier_kind(w)) {
      flush_run();
      pending_.push_back({*kind, w});
      return i + 1;
    }
    if (has(kStop, w)) {
      flush_run();
      return i + 1;
    }
    run_.push_back(w);
    return i + 1;
  }

  static std::optional<AttributeKind> modifier_kind(const std::string& w) {
    if (has(kColours, w)) return AttributeKind::colour;
    if (has(kAmounts, w) || is_number(w)) return AttributeKind::amount;
    if (has(kSizes, w)) return AttributeKind::size;
    if (has(kShapes, w)) return AttributeKind::shape;
    if (has(kMaterials, w)) return AttributeKind::material;
    if (has(kOther, w)) return AttributeKind::other;
    return std::nullopt;
  }

  // "in the upper left area (of the image)"; "of <something else>" turns the
  // phrase into a relative location.
  std::optional<std::size_t> absolute_location(std::size_t i) {
    if (!has(kLocationPreps, toks_[i]) || i + 2 >= toks_.size() || toks_[i + 1] != "the") {
      return std::nullopt;
    }
    std::size_t j = i + 2;
    while (j < toks_.size() && has(kPositions, toks_[j])) ++j;
    if (j == i + 2) return std::nullopt;
    if (j < toks_.size() && has(kAreaNouns, toks_[j])) ++j;
    flush_run();
    if (j < toks_.size() && toks_[j] == "of") {
      if (j + 2 < toks_.size() && toks_[j + 1] == "the" && has(kImageWords, toks_[j + 2])) {
        j += 3;
      } else if (j + 1 < toks_.size() && has(kImageWords, toks_[j + 1])) {
        j += 2;
      } else {
        return consume_relative(i, j);
      }
    }
    pending_.push_back({AttributeKind::absolute_location, joined(i, j)});
    return j;
  }

  std::size_t consume_relative(std::size_t start, std::size_t j) {
    while (j < toks_.size() && !has(kBoundaries, toks_[j])) ++j;
    pending_.push_back({AttributeKind::relative_location, joined(start, j)});
    return j;
  }

  std::string joined(std::size_t from, std::size_t to) const {
    std::vector<std::string> parts(toks_.begin() + static_cast<std::ptrdiff_t>(from),
                                   toks_.begin() + static_cast<std::ptrdiff_t>(to));
    return text::join(parts, " ");
  }

  void flush_run() {
    if (run_.empty()) return;
    std::string name = text::join(run_, " ");
    run_.clear();
    units_.push_back(SemanticUnit::existence(name));
    last_ = name;
    attach(name);
  }

  void attach(const std::string& name) {
    for (Modifier& m : pending_) units_.push_back(SemanticUnit::make(name, m.kind, m.value));
    pending_.clear();
  }

  void boundary() {
    flush_run();
    if (last_) attach(*last_);
  }

  void end_sentence() {
    boundary();
    pending_.clear();
    last_.reset();
  }

  const Tokens& toks_;
  Tokens run_;
  std::vector<Modifier> pending_;
  std::optional<std::string> last_;
  std::vector<SemanticUnit> units_;
};

std::vector<SemanticUnit> extract_units(std::string_view caption) {
  Tokens toks = tokenize(caption);
  return Extractor(toks).run();
}

bool single_valued(AttributeKind k) {
  switch (k) {
    case AttributeKind::colour:
    case AttributeKind::amount:
    case AttributeKind::size:
    case AttributeKind::shape:
    case AttributeKind::material:
    case AttributeKind::absolute_location:
      return true;
    default:
      return false;
  }
}

struct Conflict {
  std::string old_value;
  std::string new_value;
};

std::vector<Conflict> conflicts(const std::vector<SemanticUnit>& earlier,
                                const std::vector<SemanticUnit>& later) {
  std::vector<Conflict> out;
  for (const SemanticUnit& a : earlier) {
    if (!single_valued(a.kind)) continue;
    for (const SemanticUnit& b : later) {
      if (a.kind == b.kind && a.object_name == b.object_name && a.value != b.value) {
        out.push_back({a.value, b.value});
      }
    }
  }
  return out;
}

// Whole-word, case-insensitive replacement on a token basis.
std::string replace_phrase(const std::string& sentence, const std::string& from,
                           const std::string& to) {
  Tokens words = text::split_words(sentence);
  Tokens needle = text::split_words(from);
  if (needle.empty()) return sentence;
  auto bare = [](std::string w) {
    while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) w.pop_back();
    return text::to_lower(w);
  };
  Tokens out;
  for (std::size_t i = 0; i < words.size();) {
    bool hit = i + needle.size() <= words.size();
    for (std::size_t k = 0; hit && k < needle.size(); ++k) {
      const std::string& w = words[i + k];
      bool last = k + 1 == needle.size();
      if ((last ? bare(w) : text::to_lower(w)) != needle[k]) hit = false;
    }
    if (!hit) {
      out.push_back(words[i++]);
      continue;
    }
    std::string tail;
    const std::string& lastw = words[i + needle.size() - 1];
    std::size_t p = lastw.size();
    while (p > 0 && std::ispunct(static_cast<unsigned char>(lastw[p - 1]))) --p;
    tail = lastw.substr(p);
    out.push_back(to + tail);
    i += needle.size();
  }
  return text::join(out, " ");
}

bool ends_with_terminal(const std::string& s) {
  return !s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?');
}

std::string join_sentences(std::vector<std::string> sentences) {
  if (sentences.size() > 1) {
    for (std::string& s : sentences) {
      if (!ends_with_terminal(s)) s += '.';
    }
  }
  return text::join(sentences, " ");
}

void push_unique(std::vector<std::string>& list, std::string s) {
  std::string key = text::normalize(s);
  for (const std::string& existing : list) {
    if (text::normalize(existing) == key) return;
  }
  list.push_back(std::move(s));
}

}  // namespace

std::string denoise(std::string_view input) {
  Tokens words = text::split_words(input);
  auto bare = [](const std::string& w) {
    std::string b = text::to_lower(w);
    while (!b.empty() && std::ispunct(static_cast<unsigned char>(b.back()))) b.pop_back();
    return b;
  };
  Tokens out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string b = bare(words[i]);
    std::string next = i + 1 < words.size() ? bare(words[i + 1]) : std::string();
    if (b == "then" || b == "furthermore") continue;
    if (b == "next" && next != "to") continue;
    if (b == "and" && next == "then") continue;
    out.push_back(words[i]);
  }
  return text::join(out, " ");
}

nlohmann::json extract(std::string_view caption) {
  std::vector<SemanticUnit> units = extract_units(caption);
  return semantic::to_extraction_json(semantic::build_tree(units));
}

std::string merge_sequential(std::string_view accumulated, std::string_view addition) {
  std::vector<std::string> merged;
  for (std::string& s : text::split_sentences(accumulated)) push_unique(merged, std::move(s));
  for (const std::string& s : text::split_sentences(addition)) {
    std::vector<SemanticUnit> new_units = extract_units(s);
    std::vector<std::string> rewritten;
    for (std::string& old : merged) {
      for (const Conflict& c : conflicts(extract_units(old), new_units)) {
        old = replace_phrase(old, c.old_value, c.new_value);
      }
      push_unique(rewritten, std::move(old));
    }
    merged = std::move(rewritten);
    push_unique(merged, s);
  }
  return join_sentences(std::move(merged));
}

std::string merge_parallel(std::span<const std::string> captions) {
  std::vector<std::string> sorted(captions.begin(), captions.end());
  std::sort(sorted.begin(), sorted.end());
  std::string acc;
  for (const std::string& c : sorted) acc = merge_sequential(acc, c);
  return acc;
}

std::string questions(std::string_view caption) {
  static const std::array<const char*, 5> kPadding{
      "What kind of image is this describing?",
      "What objects can be seen in the picture?",
      "What is in the center of the picture?",
      "What's in the top left corner of the picture?",
      "What colors dominate the picture?",
  };
  std::vector<SemanticUnit> units = semantic::build_tree(extract_units(caption)).units();
  if (units.size() > 5) units.resize(5);

  std::vector<std::string> qs;
  for (std::size_t p = 0; p + units.size() < 5; ++p) qs.emplace_back(kPadding[p]);
  for (const SemanticUnit& u : units) {
    const std::string& o = u.object_name;
    switch (u.kind) {
      case AttributeKind::colour: qs.push_back("What color is the " + o + "?"); break;
      case AttributeKind::amount: qs.push_back("How many " + o + " are there?"); break;
      case AttributeKind::absolute_location:
        qs.push_back("Where is the " + o + " located in the picture?");
        break;
      case AttributeKind::relative_location:
        qs.push_back("Where is the " + o + " relative to the other objects?");
        break;
      case AttributeKind::size: qs.push_back("How large is the " + o + "?"); break;
      case AttributeKind::shape: qs.push_back("What shape is the " + o + "?"); break;
      case AttributeKind::material: qs.push_back("What is the " + o + " made of?"); break;
      case AttributeKind::object_description:
        qs.push_back("Is there a " + o + " in the picture?");
        break;
      case AttributeKind::other: qs.push_back("What else is notable about the " + o + "?"); break;
    }
  }
  std::string out;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    out += "Q" + std::to_string(i + 1) + ": " + qs[i] + "\n";
  }
  return out;
}

std::string make_audio_fixture(std::string_view transcript) {
  return std::string(kFixtureMagic) + "transcript: " + std::string(transcript) + "\n";
}

std::string read_audio_fixture(std::string_view blob) {
  if (blob.substr(0, kFixtureMagic.size()) != kFixtureMagic) {
    throw Error(ErrorCode::MalformedResponse, "audio blob is not a transcript fixture");
  }
  std::string_view rest = blob.substr(kFixtureMagic.size());
  constexpr std::string_view kKey = "transcript: ";
  if (rest.substr(0, kKey.size()) != kKey) {
    throw Error(ErrorCode::MalformedResponse, "fixture header lacks a transcript line");
  }
  rest.remove_prefix(kKey.size());
  auto nl = rest.find('\n');
  return text::trim(rest.substr(0, nl));
}

}  // namespace cotalk::gateway::mock
