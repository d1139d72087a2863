#include "dpgrpo/vocab.hpp"

#include <cctype>
#include <unordered_set>

#include "dpgrpo/errors.hpp"

namespace dpgrpo {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> reserved = [] {
        std::vector<std::string> r{std::string(Vocab::kBos), std::string(Vocab::kEos),
                                   std::string(Vocab::kUnk), std::string(kOpenThink),
                                   std::string(kCloseThink), std::string(kAnswerMarker)};
        for (char d = '0'; d <= '9'; ++d) r.emplace_back(1, d);
        for (const char* op : {"+", "-", "*", "="}) r.emplace_back(op);
        for (const char* w : {"direct", "split", "yes", "no"}) r.emplace_back(w);
        return r;
    }();
    return reserved;
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() > kMaxSize) {
        throw ValidationError("vocab has " + std::to_string(tokens_.size()) +
                              " tokens, limit is " + std::to_string(kMaxSize));
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) throw ValidationError("vocab contains an empty token");
        auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
        if (!inserted) throw ValidationError("duplicate vocab token '" + tokens_[i] + "'");
    }
    for (const auto& r : reserved_tokens()) {
        if (!index_.contains(r)) throw ValidationError("vocab misses reserved token '" + r + "'");
    }
    bos_ = id(kBos);
    eos_ = id(kEos);
    unk_ = id(kUnk);
    open_think_ = id(kOpenThink);
    close_think_ = id(kCloseThink);
    answer_ = id(kAnswerMarker);
    digit_.assign(tokens_.size(), false);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        digit_[i] = tokens_[i].size() == 1 && std::isdigit(static_cast<unsigned char>(tokens_[i][0]));
    }
}

const Vocab& Vocab::micro() {
    static const Vocab v = [] {
        std::vector<std::string> t = reserved_tokens();
        for (const char* p : {";", "?", ","}) t.emplace_back(p);
        for (const char* w : {"image", "shows", "what", "is", "are", "the", "solution",
                              "perspectives", "of", "two", "solutions", "dissimilar", "former",
                              "later", "correct", "one"}) {
            t.emplace_back(w);
        }
        return Vocab(std::move(t));
    }();
    return v;
}

std::optional<TokenId> Vocab::find(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocab::id(std::string_view tok) const {
    auto found = find(tok);
    if (!found) throw ValidationError("token '" + std::string(tok) + "' not in vocab");
    return *found;
}

bool Vocab::is_digit(TokenId id) const noexcept {
    return id < digit_.size() && digit_[id];
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        bool matched = false;
        for (std::string_view marker : {kOpenThink, kCloseThink, kAnswerMarker}) {
            if (text.substr(i, marker.size()) == marker) {
                out.push_back(id(marker));
                i += marker.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (std::isalpha(c)) {
            std::string word;
            while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
                word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
                ++i;
            }
            out.push_back(find(word).value_or(unk_));
            continue;
        }
        out.push_back(find(text.substr(i, 1)).value_or(unk_));
        ++i;
    }
    return out;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
    std::string out;
    TokenId prev = bos_;
    bool first = true;
    for (TokenId t : ids) {
        if (t == bos_ || t == eos_) continue;
        bool glue = first || prev == open_think_ || t == close_think_ ||
                    (is_digit(prev) && is_digit(t));
        if (!glue) out.push_back(' ');
        out += token(t);
        prev = t;
        first = false;
    }
    return out;
}

}  // namespace dpgrpo
