#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace promptsteer {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

enum class FactorKind { Emotion, Topic };

// The steering target: an emotion label or a topic name. Rendered as the
// control token "<name>" when prepended to an input.
struct ControlFactor {
    FactorKind kind = FactorKind::Topic;
    std::string name;
};

std::string control_token_text(const std::string& task_name);

// Immutable token inventory. Layout is fixed at construction:
//   [corpus words..., extra words..., <unk>, control tokens...]
// so ids below prompt_vocab_size() form the prompt vocabulary (everything
// except the reserved control tokens). Safe for concurrent reads.
class Vocab {
public:
    // words: distinct normalized word tokens, in the order they should get ids.
    // reserved_names: task names; each contributes the control token "<name>".
    Vocab(std::vector<std::string> words, const std::vector<std::string>& reserved_names);

    int size() const { return static_cast<int>(tokens_.size()); }
    int prompt_vocab_size() const { return unk_id_ + 1; }
    TokenId unk_id() const { return unk_id_; }

    const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    bool contains(const std::string& token) const { return index_.count(token) > 0; }

    // Id of an exact token string, or unk_id() if absent.
    TokenId id_of(const std::string& token) const;

    // Id of the control token "<name>"; throws std::out_of_range with the
    // task name if it was never registered.
    TokenId control_id(const std::string& task_name) const;
    bool is_control(TokenId id) const { return id > unk_id_; }

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId unk_id_ = -1;
};

// Lowercases ASCII and strips ASCII punctuation; whitespace-splits. Tokens
// that match a vocab entry exactly before stripping (control tokens, "<unk>")
// are kept atomic. Out-of-vocabulary words map to the unknown id.
TokenSeq tokenize(const std::string& text, const Vocab& vocab);

std::string render(const TokenSeq& seq, const Vocab& vocab);

// Splits text into normalized word strings without a vocab, for vocab building.
std::vector<std::string> normalize_words(const std::string& text);

// s(c, x): the control token for c followed by x unchanged.
TokenSeq build_steer_input(const ControlFactor& c, const TokenSeq& x, const Vocab& vocab);

// Builds a vocab from corpus lines plus any extra words (word-group entries,
// lexicon words) that must have ids even when absent from the corpus.
Vocab build_vocab(const std::vector<std::string>& corpus_lines,
                  const std::vector<std::string>& extra_words,
                  const std::vector<std::string>& reserved_names);

std::vector<std::string> read_lines(const std::string& path);

}  // namespace promptsteer
