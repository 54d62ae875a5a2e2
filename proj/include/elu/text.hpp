#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

namespace elu::text {

/// Word-level split: whitespace-separated words, with sentence punctuation
/// (. ? ! , : ;) peeled off as standalone tokens. Apostrophes stay inside
/// words ("don't" is one token).
inline std::vector<std::string> words(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    auto is_punct = [](char c) {
        return c == '.' || c == '?' || c == '!' || c == ',' || c == ':' || c == ';';
    };
    auto flush = [&] {
        if (cur.empty()) return;
        std::size_t end = cur.size();
        std::size_t punct_begin = end;
        while (punct_begin > 0 && is_punct(cur[punct_begin - 1])) --punct_begin;
        if (punct_begin > 0) out.push_back(cur.substr(0, punct_begin));
        for (std::size_t i = punct_begin; i < end; ++i) out.push_back(std::string(1, cur[i]));
        cur.clear();
    };
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

/// Inverse of words() for text produced by it: join with spaces, attaching
/// punctuation tokens to the preceding word.
inline std::string join_words(const std::vector<std::string>& toks) {
    std::string out;
    for (const auto& t : toks) {
        const bool punct = t.size() == 1 && (t[0] == '.' || t[0] == '?' || t[0] == '!' ||
                                             t[0] == ',' || t[0] == ':' || t[0] == ';');
        if (!out.empty() && !punct) out.push_back(' ');
        out += t;
    }
    return out;
}

/// Canonical form used for duplicate detection and token-overlap metrics:
/// lowercase, punctuation stripped, whitespace collapsed.
inline std::string normalize(const std::string& s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(uc)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

inline std::vector<std::string> normalized_words(const std::string& s) {
    return words(normalize(s));
}

inline bool contains_word_sequence(const std::vector<std::string>& haystack,
                                   const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), haystack.begin() + static_cast<long>(i)))
            return true;
    }
    return false;
}

/// True if `name` appears verbatim (as a word sequence) in `text`.
inline bool contains_name(const std::string& text, const std::string& name) {
    return contains_word_sequence(normalized_words(text), normalized_words(name));
}

}  // namespace elu::text
