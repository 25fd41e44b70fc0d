// Copyright 2026 The aiom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Lexical utilities shared by the validators and the reference machines:
// tokenization, stop words, term-frequency cosine, sentence segmentation,
// a light stemmer and the answer-parsing rules.
//
// The stop-word and abbreviation lists are versioned data; the copies in
// data/stopwords.txt and data/abbreviations.txt must match the arrays below.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace aiom::text {

inline constexpr std::array kStopWords = {
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
    "to", "too", "under", "until", "up", "upon", "very", "via", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "would", "you", "your", "yours", "yourself", "yourselves",};

inline constexpr std::array kAbbreviations = {
    "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "mt.", "ft.", "vs.",
    "etc.", "e.g.", "i.e.", "inc.", "ltd.", "co.", "corp.", "jan.", "feb.", "mar.",
    "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "no.",
    "fig.", "u.s.", "a.m.", "p.m.", "gen.", "gov.", "sen.", "rep.", "capt.", "lt.",
    "col.", "sgt.", "dept.", "approx.", "est.", "vol.", "ch.", "pp.", "cf.", "al.",};

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
inline bool is_upper(char c) noexcept { return c >= 'A' && c <= 'Z'; }
inline bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }
inline bool is_alnum(char c) noexcept {
  return is_digit(c) || (c >= 'a' && c <= 'z') || is_upper(c);
}
/// Bytes of multi-byte UTF-8 sequences count as word characters.
inline bool is_word_byte(char c) noexcept {
  return is_alnum(c) || static_cast<unsigned char>(c) >= 0x80;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (is_upper(c)) c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::string_view trim(std::string_view s) noexcept {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

inline const std::unordered_set<std::string_view>& stop_words() {
  static const std::unordered_set<std::string_view> set(kStopWords.begin(), kStopWords.end());
  return set;
}

inline const std::unordered_set<std::string_view>& abbreviations() {
  static const std::unordered_set<std::string_view> set(kAbbreviations.begin(),
                                                        kAbbreviations.end());
  return set;
}

inline bool is_stop_word(std::string_view w) { return stop_words().count(w) != 0; }

/// Whitespace-separated tokens, lower-cased, with ASCII punctuation removed.
/// Tokens that become empty are dropped.
inline std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_word_byte(c)) {
      cur.push_back(is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  flush();
  return out;
}

inline std::vector<std::string> content_words(std::string_view text) {
  auto ws = words(text);
  std::erase_if(ws, [](const std::string& w) { return is_stop_word(w); });
  return ws;
}

/// Number of whitespace-separated tokens.
inline std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

using TermFreq = std::map<std::string, int>;

inline TermFreq term_frequencies(std::string_view text) {
  TermFreq tf;
  for (auto& w : content_words(text)) ++tf[w];
  return tf;
}

/// Cosine similarity of two term-frequency vectors; 0 when either is empty.
inline double cosine(const TermFreq& a, const TermFreq& b) {
  if (a.empty() || b.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [w, c] : a) {
    na += double(c) * c;
    if (auto it = b.find(w); it != b.end()) dot += double(c) * it->second;
  }
  for (const auto& [w, c] : b) nb += double(c) * c;
  if (dot == 0.0) return 0.0;
  const double v = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(v, 0.0, 1.0);
}

inline bool is_closing_mark(char c) noexcept {
  return c == '"' || c == '\'' || c == ')' || c == ']';
}
inline bool is_opening_mark(char c) noexcept { return c == '"' || c == '\'' || c == '('; }

/// Splits text into sentences. A boundary is '.', '!' or '?' (optionally
/// followed by closing quotes/brackets), then whitespace, then an upper-case
/// letter (optionally behind an opening quote/bracket). A period that ends a
/// listed abbreviation is never a boundary. Sentences are trimmed.
inline std::vector<std::string> split_sentences(std::string_view body) {
  std::vector<std::string> out;
  const std::size_t n = body.size();
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    auto s = trim(body.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const char c = body[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (j < n && is_closing_mark(body[j])) ++j;
    if (j >= n || !is_space(body[j])) continue;
    std::size_t k = j;
    while (k < n && is_space(body[k])) ++k;
    if (k >= n) continue;
    const bool upper_next = is_upper(body[k]) ||
                            (is_opening_mark(body[k]) && k + 1 < n && is_upper(body[k + 1]));
    if (!upper_next) continue;
    if (c == '.') {
      std::size_t s = i;
      while (s > start && !is_space(body[s - 1])) --s;
      while (s < i && is_opening_mark(body[s])) ++s;
      if (abbreviations().count(to_lower(body.substr(s, i + 1 - s)))) continue;
    }
    emit(j);
    start = j;
    i = j - 1;
  }
  emit(n);
  return out;
}

/// Light suffix-stripping stemmer used to cluster key terms.
inline std::string stem(std::string_view word) {
  std::string w(word);
  auto ends = [&](std::string_view suf) {
    return w.size() >= suf.size() && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (w.size() > 4 && ends("ies")) {
    w.replace(w.size() - 3, 3, "y");
  } else if (w.size() > 4 && ends("oes")) {
    w.erase(w.size() - 2);
  } else if (ends("sses")) {
    w.erase(w.size() - 2);
  } else if (w.size() > 5 && ends("ing")) {
    w.erase(w.size() - 3);
  } else if (w.size() > 4 && ends("ed")) {
    w.erase(w.size() - 2);
  } else if (w.size() > 4 && ends("ly")) {
    w.erase(w.size() - 2);
  } else if (w.size() > 3 && ends("s") && !ends("ss") && !ends("us") && !ends("is")) {
    w.erase(w.size() - 1);
  }
  return w;
}

inline const std::unordered_map<std::string_view, int>& number_words() {
  static const std::unordered_map<std::string_view, int> map = {
      {"zero", 0},       {"one", 1},         {"two", 2},          {"three", 3},
      {"four", 4},       {"five", 5},        {"six", 6},          {"seven", 7},
      {"eight", 8},      {"nine", 9},        {"ten", 10},         {"eleven", 11},
      {"twelve", 12},    {"thirteen", 13},   {"fourteen", 14},    {"fifteen", 15},
      {"sixteen", 16},   {"seventeen", 17},  {"eighteen", 18},    {"nineteen", 19},
      {"twenty", 20},    {"first", 1},       {"second", 2},       {"third", 3},
      {"fourth", 4},     {"fifth", 5},       {"sixth", 6},        {"seventh", 7},
      {"eighth", 8},     {"ninth", 9},       {"tenth", 10},       {"eleventh", 11},
      {"twelfth", 12},   {"thirteenth", 13}, {"fourteenth", 14},  {"fifteenth", 15},
      {"sixteenth", 16}, {"seventeenth", 17}, {"eighteenth", 18}, {"nineteenth", 19},
      {"twentieth", 20},
  };
  return map;
}

/// First integer token of an answer. Tokens are maximal runs of ASCII letters
/// and digits. Accepted forms: a digit run ("7"), a digit run with an ordinal
/// suffix ("7th", "3rd"), or an English number word zero..twenty, cardinal or
/// ordinal ("seven", "seventh").
inline std::optional<long> first_integer(std::string_view answer) {
  std::size_t i = 0;
  const std::size_t n = answer.size();
  while (i < n) {
    while (i < n && !is_alnum(answer[i])) ++i;
    std::size_t j = i;
    while (j < n && is_alnum(answer[j])) ++j;
    if (j > i) {
      const std::string tok = to_lower(answer.substr(i, j - i));
      std::size_t d = 0;
      while (d < tok.size() && is_digit(tok[d])) ++d;
      if (d > 0 && d <= 9) {
        const std::string_view suffix = std::string_view(tok).substr(d);
        if (suffix.empty() || suffix == "st" || suffix == "nd" || suffix == "rd" ||
            suffix == "th") {
          return std::stol(tok.substr(0, d));
        }
      } else if (auto it = number_words().find(tok); it != number_words().end()) {
        return it->second;
      }
    }
    i = j;
  }
  return std::nullopt;
}

/// Parses a pairwise difficulty judgement: first occurrence of "harder" (+1),
/// "easier" (-1), "same" (0), or a signed decimal number (its sign).
inline std::optional<int> parse_comparison(std::string_view answer) {
  const std::size_t n = answer.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = answer[i];
    if (is_alnum(c) && (c < '0' || c > '9')) {
      std::size_t j = i;
      while (j < n && is_alnum(answer[j])) ++j;
      const std::string tok = to_lower(answer.substr(i, j - i));
      if (tok == "harder") return 1;
      if (tok == "easier") return -1;
      if (tok == "same") return 0;
      i = j;
      continue;
    }
    if (is_digit(c) || ((c == '+' || c == '-') && i + 1 < n && is_digit(answer[i + 1]))) {
      // Do not treat digits glued to letters as a number ("grade7").
      if (i > 0 && is_alnum(answer[i - 1])) {
        ++i;
        continue;
      }
      int sign = 1;
      std::size_t j = i;
      if (answer[j] == '+' || answer[j] == '-') {
        sign = answer[j] == '-' ? -1 : 1;
        ++j;
      }
      bool nonzero = false;
      while (j < n && (is_digit(answer[j]) || answer[j] == '.')) {
        if (is_digit(answer[j]) && answer[j] != '0') nonzero = true;
        ++j;
      }
      return nonzero ? sign : 0;
    }
    ++i;
  }
  return std::nullopt;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace aiom::text
