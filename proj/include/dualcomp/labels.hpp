// Offline supervision for the router: keyword-rule lambda labels, fusion with
// an externally provided LLM score, and the instruction pooling step.
#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dualcomp/common.hpp"
#include "dualcomp/router.hpp"

namespace dualcomp {

// Keyword phrase -> weight, per class. Phrases are lowercase and may span
// several words ("how many").
struct Lexicon {
    std::map<std::string, double> geometric;
    std::map<std::string, double> semantic;

    friend bool operator==(const Lexicon&, const Lexicon&) = default;
};

[[nodiscard]] inline Lexicon default_lexicon() {
    Lexicon lex;
    for (const char* k : {"route", "path", "plan", "boundary", "zone", "land use", "direction", "layout", "connect",
                          "region"})
        lex.geometric[k] = 1.0;
    for (const char* k : {"count", "how many", "color", "present", "object", "category", "class", "state", "moving"})
        lex.semantic[k] = 1.0;
    return lex;
}

// Lowercased alphanumeric words; everything else separates words.
[[nodiscard]] inline std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

namespace detail {

// Number of times a (possibly multi-word) phrase is matched in a bag of words:
// the minimum count over the phrase's words. Bag semantics make the score
// independent of word order.
[[nodiscard]] inline double phrase_matches(const std::map<std::string, int>& bag, const std::string& phrase) {
    const auto words = tokenize_words(phrase);
    if (words.empty()) return 0.0;
    int n = -1;
    for (const auto& w : words) {
        auto it = bag.find(w);
        const int c = it == bag.end() ? 0 : it->second;
        n = n < 0 ? c : std::min(n, c);
    }
    return static_cast<double>(std::max(n, 0));
}

}  // namespace detail

// w_g / (w_g + w_s) over matched keyword weights; 0.5 when nothing matches.
[[nodiscard]] inline double rule_label(std::string_view text, const Lexicon& lex) {
    if (lex.geometric.empty() || lex.semantic.empty()) throw ConfigError("lexicon needs both keyword classes");
    std::map<std::string, int> bag;
    for (auto& w : tokenize_words(text)) ++bag[w];
    double wg = 0.0;
    double ws = 0.0;
    for (const auto& [phrase, weight] : lex.geometric) wg += weight * detail::phrase_matches(bag, phrase);
    for (const auto& [phrase, weight] : lex.semantic) ws += weight * detail::phrase_matches(bag, phrase);
    if (wg + ws <= 0.0) return 0.5;
    return wg / (wg + ws);
}

// Lexicon file: one entry per line, "<geometric|semantic> <weight> <phrase...>".
// Blank lines and lines starting with '#' are ignored.
[[nodiscard]] inline Lexicon parse_lexicon(std::istream& in) {
    Lexicon lex;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        std::string cls;
        double weight = 0.0;
        if (!(ss >> cls >> weight)) throw FormatError("lexicon line " + std::to_string(lineno) + ": expected class and weight");
        std::string rest;
        std::getline(ss, rest);
        std::string phrase;
        for (const auto& w : tokenize_words(rest)) phrase += (phrase.empty() ? "" : " ") + w;
        if (phrase.empty()) throw FormatError("lexicon line " + std::to_string(lineno) + ": missing keyword");
        if (!(weight >= 0.0)) throw FormatError("lexicon line " + std::to_string(lineno) + ": weight must be >= 0");
        if (cls == "geometric") lex.geometric[phrase] = weight;
        else if (cls == "semantic") lex.semantic[phrase] = weight;
        else throw FormatError("lexicon line " + std::to_string(lineno) + ": unknown class '" + cls + "'");
    }
    if (lex.geometric.empty() || lex.semantic.empty()) throw FormatError("lexicon needs both keyword classes");
    return lex;
}

[[nodiscard]] inline std::string format_lexicon(const Lexicon& lex) {
    std::ostringstream out;
    out << "# class weight keyword\n";
    for (const auto& [k, w] : lex.geometric) out << "geometric " << w << ' ' << k << '\n';
    for (const auto& [k, w] : lex.semantic) out << "semantic " << w << ' ' << k << '\n';
    return out.str();
}

// alpha * lambda_llm + (1 - alpha) * lambda_rule; lambda_rule alone when the
// LLM score is absent.
[[nodiscard]] inline double fuse_labels(std::optional<double> lambda_llm, double lambda_rule, double alpha) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(lambda_rule)) throw InvalidInput("lambda_rule outside [0,1]");
    if (!in_unit(alpha)) throw InvalidInput("alpha outside [0,1]");
    if (!lambda_llm) return lambda_rule;
    if (!in_unit(*lambda_llm)) throw InvalidInput("lambda_llm outside [0,1]");
    return alpha * *lambda_llm + (1.0 - alpha) * lambda_rule;
}

struct LabelRecord {
    std::string text;
    double lambda_rule = 0.5;
    std::optional<double> lambda_llm;
    double alpha = 0.5;
    double lambda_gt = 0.5;
    double rho_gt = 1.0;
};

[[nodiscard]] inline LabelRecord make_label(std::string text, double lambda_rule, std::optional<double> lambda_llm,
                                            double alpha, double rho_gt, double rho_min = kDefaultRhoMin) {
    if (!(rho_gt >= rho_min && rho_gt <= 1.0)) throw InvalidInput("rho_gt outside [rho_min,1]");
    LabelRecord r;
    r.text = std::move(text);
    r.lambda_rule = lambda_rule;
    r.lambda_llm = lambda_llm;
    r.alpha = alpha;
    r.lambda_gt = fuse_labels(lambda_llm, lambda_rule, alpha);
    r.rho_gt = rho_gt;
    return r;
}

// Mean pooling of per-token text embeddings into one instruction vector.
[[nodiscard]] inline InstructionRepr mean_pool(const std::vector<std::vector<double>>& token_embeddings,
                                               std::optional<std::string> raw_text = std::nullopt) {
    if (token_embeddings.empty()) throw InvalidInput("no token embeddings to pool");
    const std::size_t d = token_embeddings.front().size();
    if (d == 0) throw InvalidInput("token embeddings have zero dimension");
    InstructionRepr r;
    r.embedding.assign(d, 0.0);
    for (const auto& t : token_embeddings) {
        if (t.size() != d) throw InvalidInput("token embeddings have inconsistent dimensions");
        for (std::size_t k = 0; k < d; ++k) r.embedding[k] += t[k];
    }
    for (double& v : r.embedding) v /= static_cast<double>(token_embeddings.size());
    if (!all_finite(std::span<const double>(r.embedding))) throw InvalidInput("pooled embedding is not finite");
    r.raw_text = std::move(raw_text);
    return r;
}

}  // namespace dualcomp
