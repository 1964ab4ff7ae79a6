#include <algorithm>
#include <cctype>
#include <array>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "autotm/corpus.h"

namespace autotm {
namespace {

// English list is the common SMART-derived short list; Russian is the usual
// NLTK-style list of function words.
constexpr std::array kEnglishStopwords = {
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an",
    "and", "any", "are", "as", "at", "be", "because", "been", "before", "being",
    "below", "between", "both", "but", "by", "can", "could", "did", "do", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had",
    "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no",
    "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our",
    "ours", "ourselves", "out", "over", "own", "same", "shall", "she", "should",
    "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "us", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with",
    "would", "you", "your", "yours", "yourself", "yourselves"};

constexpr std::array kRussianStopwords = {
    "и", "в", "во", "не", "что", "он", "на", "я", "с", "со", "как", "а", "то",
    "все", "она", "так", "его", "но", "да", "ты", "к", "у", "же", "вы", "за",
    "бы", "по", "только", "ее", "мне", "было", "вот", "от", "меня", "еще", "нет",
    "о", "из", "ему", "теперь", "когда", "даже", "ну", "вдруг", "ли", "если",
    "уже", "или", "ни", "быть", "был", "него", "до", "вас", "нибудь", "опять",
    "уж", "вам", "ведь", "там", "потом", "себя", "ничего", "ей", "может", "они",
    "тут", "где", "есть", "надо", "ней", "для", "мы", "тебя", "их", "чем", "была",
    "сам", "чтоб", "без", "будто", "чего", "раз", "тоже", "себе", "под", "будет",
    "ж", "тогда", "кто", "этот", "того", "потому", "этого", "какой", "совсем",
    "ним", "здесь", "этом", "один", "почти", "мой", "тем", "чтобы", "нее", "были",
    "куда", "зачем", "всех", "никогда", "можно", "при", "наконец", "два", "об",
    "другой", "хоть", "после", "над", "больше", "тот", "через", "эти", "нас",
    "про", "всего", "них", "какая", "много", "разве", "три", "эту", "моя",
    "впрочем", "хорошо", "свою", "этой", "перед", "иногда", "лучше", "чуть",
    "том", "нельзя", "такой", "им", "более", "всегда", "конечно", "всю", "между",
    "это", "также", "который", "которые", "которая", "которых"};

const std::unordered_set<std::string>& BuiltinStopwords() {
  static const auto* set = [] {
    auto* s = new std::unordered_set<std::string>();
    for (const char* w : kEnglishStopwords) s->insert(w);
    for (const char* w : kRussianStopwords) s->insert(w);
    return s;
  }();
  return *set;
}

// Decodes one code point starting at s[i]; invalid bytes decode to U+FFFD and
// advance by one.
char32_t DecodeUtf8(std::string_view s, size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(k);
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += len;
  return cp;
}

void AppendUtf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

char32_t ToLower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  if (cp >= 0x0410 && cp <= 0x042F) return cp + 32;  // А..Я
  if (cp >= 0x0400 && cp <= 0x040F) return cp + 80;  // Ѐ..Џ
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 32;
  return cp;
}

bool IsDigit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

// Letters: ASCII, Latin-1/Extended Latin, Greek, Cyrillic, and everything
// above the general punctuation/symbol blocks.
bool IsLetter(char32_t cp) {
  if ((cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z')) return true;
  if (cp < 0xC0) return false;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp == 0xFFFD || (cp >= 0xFE00 && cp <= 0xFE6F)) return false;
  return true;
}

bool IsCyrillic(char32_t cp) { return cp >= 0x0400 && cp <= 0x04FF; }

std::u32string Decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) out.push_back(DecodeUtf8(s, i));
  return out;
}

std::string Encode(std::u32string_view s) {
  std::string out;
  for (char32_t cp : s) AppendUtf8(out, cp);
  return out;
}

// Replaces tags with a space and decodes the handful of entities that show up
// in scraped text.
std::string StripHtml(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  size_t i = 0;
  while (i < raw.size()) {
    const char c = raw[i];
    if (c == '<') {
      const size_t close = raw.find('>', i + 1);
      const bool looks_like_tag =
          close != std::string_view::npos && i + 1 < raw.size() &&
          (std::isalpha(static_cast<unsigned char>(raw[i + 1])) || raw[i + 1] == '/' ||
           raw[i + 1] == '!' || raw[i + 1] == '?');
      if (looks_like_tag) {
        out.push_back(' ');
        i = close + 1;
        continue;
      }
    } else if (c == '&') {
      static constexpr std::array<std::pair<std::string_view, char>, 7> kEntities = {{
          {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'},
          {"&#39;", '\''}, {"&apos;", '\''}, {"&nbsp;", ' '}}};
      bool matched = false;
      for (const auto& [name, ch] : kEntities) {
        if (raw.substr(i, name.size()) == name) {
          out.push_back(ch);
          i += name.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

bool EndsWith(std::u32string_view s, std::u32string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

constexpr std::array<std::u32string_view, 34> kRussianEndings = {
    U"иями", U"ями", U"ами", U"ого", U"его", U"ому", U"ему", U"ыми", U"ими",
    U"ией", U"ия", U"ие", U"ий", U"ый", U"ой", U"ая", U"яя", U"ое", U"ее",
    U"ые", U"ов", U"ев", U"ей", U"ам", U"ям", U"ах", U"ях", U"ом", U"ем",
    U"а", U"я", U"ы", U"и", U"у"};

}  // namespace

bool IsBuiltinStopword(const std::string& token) {
  return BuiltinStopwords().contains(token);
}

std::string StemToken(const std::string& token) {
  std::u32string w = Decode(token);
  if (w.empty()) return token;
  if (IsCyrillic(w.front())) {
    // Longest matching ending, keeping a stem of at least three letters.
    for (std::u32string_view ending : kRussianEndings) {
      if (EndsWith(w, ending) && w.size() >= ending.size() + 3) {
        w.resize(w.size() - ending.size());
        break;
      }
    }
    return Encode(w);
  }
  // Harman's S stemmer.
  if (EndsWith(w, U"ies") && !EndsWith(w, U"eies") && !EndsWith(w, U"aies")) {
    w.replace(w.size() - 3, 3, U"y");
  } else if (EndsWith(w, U"es") && !EndsWith(w, U"aes") && !EndsWith(w, U"ees") &&
             !EndsWith(w, U"oes")) {
    w.resize(w.size() - 1);
  } else if (EndsWith(w, U"s") && !EndsWith(w, U"us") && !EndsWith(w, U"ss")) {
    w.resize(w.size() - 1);
  }
  return Encode(w);
}

std::vector<std::string> PreprocessText(std::string_view raw,
                                        const PreprocessConfig& config) {
  const std::string cleaned = config.strip_html ? StripHtml(raw) : std::string(raw);
  const std::u32string text = Decode(cleaned);

  std::unordered_set<std::string> extra(config.extra_stopwords.begin(),
                                        config.extra_stopwords.end());
  std::vector<std::string> tokens;
  std::u32string current;
  auto flush = [&] {
    if (current.empty()) return;
    std::string token = Encode(current);
    current.clear();
    if (config.remove_stopwords && (IsBuiltinStopword(token) || extra.contains(token))) {
      return;
    }
    if (config.stem) token = StemToken(token);
    if (auto it = config.replacements.find(token); it != config.replacements.end()) {
      token = it->second;
    }
    if (config.normalizer) token = config.normalizer(token);
    if (token.empty()) return;
    if (static_cast<int>(Decode(token).size()) < config.min_token_len) return;
    if (config.remove_stopwords && extra.contains(token)) return;
    tokens.push_back(std::move(token));
  };

  for (char32_t cp : text) {
    const bool keep = IsLetter(cp) || (!config.remove_digits && IsDigit(cp));
    if (keep) {
      current.push_back(config.lowercase ? ToLower(cp) : cp);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

}  // namespace autotm
