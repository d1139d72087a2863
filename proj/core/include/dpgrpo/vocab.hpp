#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dpgrpo {

using TokenId = std::uint16_t;

inline constexpr std::string_view kOpenThink = "<think>";
inline constexpr std::string_view kCloseThink = "</think>";
inline constexpr std::string_view kAnswerMarker = "Answer:";

// Fixed token inventory of the micro-task world. Tokens are whole words,
// single digits, single punctuation characters, or one of the reserved
// markers. Capped at 64 entries.
class Vocab {
public:
    static constexpr std::size_t kMaxSize = 64;

    static constexpr std::string_view kBos = "<bos>";
    static constexpr std::string_view kEos = "<eos>";
    static constexpr std::string_view kUnk = "<unk>";

    // Throws ValidationError when the list is too large, has duplicates, or
    // misses a reserved token.
    explicit Vocab(std::vector<std::string> tokens);

    // The default vocabulary: reserved markers, digits, arithmetic operators,
    // route tags, verdicts and the words used by captions, questions and the
    // two judgment instructions.
    static const Vocab& micro();

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    std::optional<TokenId> find(std::string_view tok) const;
    TokenId id(std::string_view tok) const;  // throws if absent

    TokenId bos() const noexcept { return bos_; }
    TokenId eos() const noexcept { return eos_; }
    TokenId unk() const noexcept { return unk_; }
    TokenId open_think() const noexcept { return open_think_; }
    TokenId close_think() const noexcept { return close_think_; }
    TokenId answer_marker() const noexcept { return answer_; }

    bool is_digit(TokenId id) const noexcept;

    // Text -> ids. Unknown words and characters map to <unk>. Does not add
    // BOS or EOS.
    std::vector<TokenId> encode(std::string_view text) const;

    // Ids -> text. Adjacent digits are joined, no space is emitted after
    // <think> or before </think>, BOS/EOS are dropped. decode(encode(t)) == t
    // for text already in that canonical spacing.
    std::string decode(std::span<const TokenId> ids) const;

    bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId bos_{}, eos_{}, unk_{}, open_think_{}, close_think_{}, answer_{};
    std::vector<bool> digit_;
};

// Reserved tokens every Vocab must contain.
const std::vector<std::string>& reserved_tokens();

}  // namespace dpgrpo
