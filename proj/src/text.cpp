#include "promptsteer/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "promptsteer/errors.hpp"

namespace promptsteer {

std::string control_token_text(const std::string& task_name) {
    return "<" + task_name + ">";
}

namespace {

std::string normalize_word(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (unsigned char ch : raw) {
        if (std::isalnum(ch))
            out.push_back(static_cast<char>(std::tolower(ch)));
        else if (!std::ispunct(ch))
            out.push_back(static_cast<char>(ch));
    }
    return out;
}

std::string lower_ascii(const std::string& raw) {
    std::string out = raw;
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> words, const std::vector<std::string>& reserved_names) {
    tokens_ = std::move(words);
    tokens_.push_back("<unk>");
    unk_id_ = static_cast<TokenId>(tokens_.size()) - 1;
    for (const auto& name : reserved_names) tokens_.push_back(control_token_text(name));

    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
        if (!inserted)
            throw std::invalid_argument("vocab: duplicate token '" + tokens_[i] + "'");
    }
}

TokenId Vocab::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_id_ : it->second;
}

TokenId Vocab::control_id(const std::string& task_name) const {
    auto it = index_.find(control_token_text(task_name));
    if (it == index_.end() || it->second <= unk_id_)
        throw std::out_of_range("unknown control factor: task '" + task_name +
                                "' has no registered control token");
    return it->second;
}

TokenSeq tokenize(const std::string& text, const Vocab& vocab) {
    TokenSeq out;
    std::istringstream stream(text);
    std::string raw;
    while (stream >> raw) {
        std::string lowered = lower_ascii(raw);
        if (vocab.contains(lowered)) {
            out.push_back(vocab.id_of(lowered));
            continue;
        }
        std::string word = normalize_word(raw);
        if (word.empty()) continue;
        out.push_back(vocab.id_of(word));
    }
    return out;
}

std::string render(const TokenSeq& seq, const Vocab& vocab) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out.push_back(' ');
        out += vocab.token(seq[i]);
    }
    return out;
}

std::vector<std::string> normalize_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream stream(text);
    std::string raw;
    while (stream >> raw) {
        std::string word = normalize_word(raw);
        if (!word.empty()) out.push_back(word);
    }
    return out;
}

TokenSeq build_steer_input(const ControlFactor& c, const TokenSeq& x, const Vocab& vocab) {
    TokenSeq out;
    out.reserve(x.size() + 1);
    out.push_back(vocab.control_id(c.name));
    out.insert(out.end(), x.begin(), x.end());
    return out;
}

Vocab build_vocab(const std::vector<std::string>& corpus_lines,
                  const std::vector<std::string>& extra_words,
                  const std::vector<std::string>& reserved_names) {
    std::vector<std::string> words;
    std::unordered_map<std::string, bool> seen;
    auto add = [&](const std::string& w) {
        if (w.empty() || seen.count(w)) return;
        seen.emplace(w, true);
        words.push_back(w);
    };
    for (const auto& line : corpus_lines)
        for (const auto& w : normalize_words(line)) add(w);
    for (const auto& w : extra_words) add(normalize_word(w));
    return Vocab(std::move(words), reserved_names);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace promptsteer
