#include "dlsim/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dlsim/text.hpp"

using nlohmann::json;

namespace dlsim {

Variant parse_variant(const std::string& name) {
    if (name == "text-only" || name == "text_only") return Variant::TextOnly;
    if (name == "engineered") return Variant::Engineered;
    throw std::invalid_argument("unknown variant: " + name + " (expected text-only|engineered)");
}

std::string variant_name(Variant variant) {
    return variant == Variant::TextOnly ? "text-only" : "engineered";
}

std::vector<std::string> default_keywords() {
    return {"summarize", "list", "explain", "write", "poem", "essay", "code", "brief", "detail"};
}

void TrainConfig::validate() const {
    if (rounds < 1) throw std::invalid_argument("train config: rounds must be >= 1");
    if (max_depth < 1) throw std::invalid_argument("train config: max_depth must be >= 1");
    if (!(learning_rate > 0 && learning_rate <= 1))
        throw std::invalid_argument("train config: learning_rate must be in (0,1]");
    if (min_samples_leaf < 1) throw std::invalid_argument("train config: min_samples_leaf must be >= 1");
    if (hash_buckets < 1 || (hash_buckets & (hash_buckets - 1)) != 0)
        throw std::invalid_argument("train config: hash_buckets must be a positive power of two");
}

size_t feature_count(Variant variant, const FeatureConfig& config) {
    size_t n = static_cast<size_t>(config.hash_buckets) + 2; // ngram hashes + char/token counts
    if (variant == Variant::Engineered) n += config.keywords.size() + 5 + 1;
    return n;
}

std::vector<std::string> feature_names(Variant variant, const FeatureConfig& config) {
    std::vector<std::string> names;
    names.reserve(feature_count(variant, config));
    for (int i = 0; i < config.hash_buckets; ++i)
        names.push_back("ngram_hash[" + std::to_string(i) + "]");
    names.push_back("char_count");
    names.push_back("token_count");
    if (variant == Variant::Engineered) {
        for (const auto& kw : config.keywords) names.push_back("kw:" + kw);
        names.push_back("punct:question");
        names.push_back("punct:exclam");
        names.push_back("punct:comma");
        names.push_back("punct:newline");
        names.push_back("punct:code_fence");
        names.push_back("entropy");
    }
    return names;
}

namespace {

size_t count_occurrences(std::string_view text, std::string_view needle) {
    size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

double char_entropy_bits(std::string_view text) {
    std::vector<std::pair<uint32_t, size_t>> counts;
    size_t i = 0, total = 0;
    // Small-alphabet histogram; linear scan beats a map at prompt sizes.
    while (i < text.size()) {
        const uint32_t cp = next_codepoint(text, i);
        ++total;
        auto it = std::find_if(counts.begin(), counts.end(),
                               [cp](const auto& p) { return p.first == cp; });
        if (it == counts.end())
            counts.emplace_back(cp, 1);
        else
            ++it->second;
    }
    if (total == 0) return 0;
    double h = 0;
    for (const auto& [cp, n] : counts) {
        const double p = static_cast<double>(n) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h < 0 ? 0 : h;
}

} // namespace

FeatureVector featurize(std::string_view prompt, Variant variant, const FeatureConfig& config) {
    if (config.hash_algo != "fnv1a64")
        throw std::invalid_argument("unsupported hash algorithm: " + config.hash_algo);
    FeatureVector fv;
    fv.values.assign(feature_count(variant, config), 0.0);
    const auto buckets = static_cast<uint64_t>(config.hash_buckets);

    const std::string lowered = ascii_lower(prompt);
    std::vector<std::pair<size_t, size_t>> units;
    for_each_unit(lowered, [&](size_t b, size_t e) { units.emplace_back(b, e); });

    auto unit = [&](size_t idx) {
        return std::string_view(lowered).substr(units[idx].first,
                                                units[idx].second - units[idx].first);
    };
    for (size_t i = 0; i < units.size(); ++i) {
        fv.values[fnv1a64(unit(i)) % buckets] += 1.0;
        if (i + 1 < units.size()) {
            std::string bigram(unit(i));
            bigram += '\x1f';
            bigram += unit(i + 1);
            fv.values[fnv1a64(bigram) % buckets] += 1.0;
        }
    }

    size_t at = static_cast<size_t>(config.hash_buckets);
    fv.values[at++] = static_cast<double>(count_codepoints(prompt));
    fv.values[at++] = static_cast<double>(units.size());

    if (variant == Variant::Engineered) {
        for (const auto& kw : config.keywords)
            fv.values[at++] = lowered.find(kw) != std::string::npos ? 1.0 : 0.0;
        fv.values[at++] = static_cast<double>(std::count(prompt.begin(), prompt.end(), '?'));
        fv.values[at++] = static_cast<double>(std::count(prompt.begin(), prompt.end(), '!'));
        fv.values[at++] = static_cast<double>(std::count(prompt.begin(), prompt.end(), ','));
        fv.values[at++] = static_cast<double>(std::count(prompt.begin(), prompt.end(), '\n'));
        fv.values[at++] = static_cast<double>(count_occurrences(prompt, "```"));
        fv.values[at++] = char_entropy_bits(prompt);
    }
    return fv;
}

double RegressionTree::predict(const std::vector<double>& features) const {
    int at = 0;
    while (!nodes[at].is_leaf())
        at = features[static_cast<size_t>(nodes[at].feature)] <= nodes[at].threshold
                 ? nodes[at].left
                 : nodes[at].right;
    return nodes[at].value;
}

namespace {

struct SplitChoice {
    double gain = 0;
    int feature = -1;
    double threshold = 0;
};

// Exact greedy single-tree fit to the residual vector, grown level by
// level. `order` holds per-feature presorted sample indices.
RegressionTree fit_tree(const FeatureMatrix& X, const std::vector<double>& residuals,
                        const std::vector<std::vector<uint32_t>>& order, int max_depth,
                        int min_leaf, std::vector<int>& node_of) {
    const size_t n = residuals.size();
    const size_t n_features = X.columns.size();

    RegressionTree tree;
    double root_sum = 0;
    for (double r : residuals) root_sum += r;
    tree.nodes.push_back({-1, 0, -1, -1, root_sum / static_cast<double>(n)});
    std::fill(node_of.begin(), node_of.end(), 0);

    struct NodeStats {
        int node = 0;
        size_t count = 0;
        double sum = 0;
    };
    std::vector<NodeStats> frontier = {{0, n, root_sum}};

    for (int depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
        // slot_of[node id] -> index into frontier, -1 when settled.
        std::vector<int> slot_of(tree.nodes.size(), -1);
        for (size_t s = 0; s < frontier.size(); ++s)
            slot_of[static_cast<size_t>(frontier[s].node)] = static_cast<int>(s);

        std::vector<SplitChoice> best(frontier.size());

        struct ScanState {
            size_t left_count = 0;
            double left_sum = 0;
            double prev = 0;
            bool seen = false;
        };
        std::vector<ScanState> scan(frontier.size());

        for (size_t j = 0; j < n_features; ++j) {
            std::fill(scan.begin(), scan.end(), ScanState{});
            const auto& column = X.columns[j];
            for (uint32_t idx : order[j]) {
                const int slot = slot_of[static_cast<size_t>(node_of[idx])];
                if (slot < 0) continue;
                const auto& node = frontier[static_cast<size_t>(slot)];
                if (node.count < 2 * static_cast<size_t>(min_leaf)) continue;
                ScanState& st = scan[static_cast<size_t>(slot)];
                const double v = column[idx];
                if (st.seen && v != st.prev && st.left_count >= static_cast<size_t>(min_leaf)) {
                    const size_t right_count = node.count - st.left_count;
                    if (right_count >= static_cast<size_t>(min_leaf)) {
                        const double right_sum = node.sum - st.left_sum;
                        const double gain =
                            st.left_sum * st.left_sum / static_cast<double>(st.left_count) +
                            right_sum * right_sum / static_cast<double>(right_count) -
                            node.sum * node.sum / static_cast<double>(node.count);
                        if (gain > best[static_cast<size_t>(slot)].gain) {
                            best[static_cast<size_t>(slot)] = {gain, static_cast<int>(j),
                                                               (st.prev + v) / 2.0};
                        }
                    }
                }
                st.left_count += 1;
                st.left_sum += residuals[idx];
                st.prev = v;
                st.seen = true;
            }
        }

        // Materialize the chosen splits, then route samples to children.
        std::vector<NodeStats> next;
        std::vector<int> child_slot(frontier.size(), -1);
        for (size_t s = 0; s < frontier.size(); ++s) {
            if (best[s].feature < 0 || best[s].gain <= 0) continue;
            TreeNode& parent = tree.nodes[static_cast<size_t>(frontier[s].node)];
            parent.feature = best[s].feature;
            parent.threshold = best[s].threshold;
            parent.left = static_cast<int>(tree.nodes.size());
            parent.right = parent.left + 1;
            tree.nodes.push_back({-1, 0, -1, -1, 0});
            tree.nodes.push_back({-1, 0, -1, -1, 0});
            child_slot[s] = static_cast<int>(next.size());
            next.push_back({tree.nodes[static_cast<size_t>(frontier[s].node)].left, 0, 0});
            next.push_back({tree.nodes[static_cast<size_t>(frontier[s].node)].right, 0, 0});
        }
        if (next.empty()) break;

        for (size_t i = 0; i < n; ++i) {
            const int slot = slot_of[static_cast<size_t>(node_of[i])];
            if (slot < 0 || child_slot[static_cast<size_t>(slot)] < 0) continue;
            const TreeNode& parent = tree.nodes[static_cast<size_t>(node_of[i])];
            const bool go_left =
                X.columns[static_cast<size_t>(parent.feature)][i] <= parent.threshold;
            const int child = go_left ? parent.left : parent.right;
            node_of[i] = child;
            NodeStats& stats =
                next[static_cast<size_t>(child_slot[static_cast<size_t>(slot)]) + (go_left ? 0 : 1)];
            stats.count += 1;
            stats.sum += residuals[i];
        }
        for (const NodeStats& stats : next)
            tree.nodes[static_cast<size_t>(stats.node)].value =
                stats.count > 0 ? stats.sum / static_cast<double>(stats.count) : 0.0;
        frontier = std::move(next);
    }
    return tree;
}

} // namespace

GbdtModel train_on_matrix(const FeatureMatrix& X, const std::vector<double>& targets,
                          const TrainConfig& config, TrainDiagnostics* diagnostics) {
    config.validate();
    const size_t n = targets.size();
    if (n == 0) throw std::invalid_argument("train: empty input");
    if (X.rows != n) throw std::invalid_argument("train: feature/target row mismatch");
    if (n < 2 * static_cast<size_t>(config.min_samples_leaf))
        throw std::invalid_argument("train: need at least 2*min_samples_leaf records");
    for (double y : targets)
        if (!std::isfinite(y)) throw std::invalid_argument("train: non-finite target");
    for (const auto& col : X.columns)
        if (col.size() != n) throw std::invalid_argument("train: ragged feature matrix");

    GbdtModel model;
    model.learning_rate = config.learning_rate;
    long double mean = 0;
    for (double y : targets) mean += y;
    model.base_score = static_cast<double>(mean / static_cast<long double>(n));

    // Presort sample indices per feature once; ties keep index order.
    std::vector<std::vector<uint32_t>> order(X.columns.size());
    for (size_t j = 0; j < X.columns.size(); ++j) {
        order[j].resize(n);
        std::iota(order[j].begin(), order[j].end(), 0u);
        const auto& col = X.columns[j];
        std::stable_sort(order[j].begin(), order[j].end(),
                         [&col](uint32_t a, uint32_t b) { return col[a] < col[b]; });
    }

    std::vector<double> residuals(n);
    for (size_t i = 0; i < n; ++i) residuals[i] = targets[i] - model.base_score;

    std::vector<int> node_of(n, 0);
    model.trees.reserve(static_cast<size_t>(config.rounds));
    for (int round = 0; round < config.rounds; ++round) {
        RegressionTree tree =
            fit_tree(X, residuals, order, config.max_depth, config.min_samples_leaf, node_of);
        for (size_t i = 0; i < n; ++i)
            residuals[i] -= config.learning_rate * tree.nodes[static_cast<size_t>(node_of[i])].value;
        model.trees.push_back(std::move(tree));
        if (diagnostics) {
            long double sse = 0;
            for (double r : residuals) sse += static_cast<long double>(r) * r;
            diagnostics->rmse_per_round.push_back(
                static_cast<double>(std::sqrt(static_cast<double>(sse / static_cast<long double>(n)))));
        }
    }
    return model;
}

GbdtModel train(const std::vector<PromptRecord>& records, Variant variant,
                const TrainConfig& config, TrainDiagnostics* diagnostics) {
    config.validate();
    if (records.empty()) throw std::invalid_argument("train: empty input");

    FeatureConfig fc;
    fc.hash_buckets = config.hash_buckets;
    fc.keywords = config.keywords;

    FeatureMatrix X;
    X.rows = records.size();
    X.columns.assign(feature_count(variant, fc), std::vector<double>(records.size()));
    std::vector<double> targets(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        const FeatureVector fv = featurize(records[i].prompt_text, variant, fc);
        for (size_t j = 0; j < fv.values.size(); ++j) X.columns[j][i] = fv.values[j];
        targets[i] = static_cast<double>(records[i].response_length);
    }

    GbdtModel model = train_on_matrix(X, targets, config, diagnostics);
    model.variant = variant;
    model.feature_config = fc;
    model.split.seed = config.seed;
    return model;
}

double predict_raw(const GbdtModel& model, const FeatureVector& features) {
    double sum = 0;
    for (const auto& tree : model.trees) sum += tree.predict(features.values);
    return model.base_score + model.learning_rate * sum;
}

int64_t predict_length(const GbdtModel& model, std::string_view prompt) {
    const FeatureVector fv = featurize(prompt, model.variant, model.feature_config);
    return std::max<int64_t>(1, std::llround(predict_raw(model, fv)));
}

RegressionMetrics evaluate(const GbdtModel& model, const std::vector<PromptRecord>& records) {
    if (records.empty()) throw std::invalid_argument("evaluate: empty input");
    long double sse = 0, sae = 0;
    size_t within = 0;
    for (const auto& rec : records) {
        const auto predicted = static_cast<double>(predict_length(model, rec.prompt_text));
        const double err = predicted - static_cast<double>(rec.response_length);
        sse += static_cast<long double>(err) * err;
        sae += std::fabs(err);
        if (std::fabs(err) <= 0.10 * static_cast<double>(rec.response_length)) ++within;
    }
    const auto n = static_cast<long double>(records.size());
    RegressionMetrics m;
    m.rmse = static_cast<double>(std::sqrt(static_cast<double>(sse / n)));
    m.mae = static_cast<double>(sae / n);
    m.pct_within_10 = 100.0 * static_cast<double>(within) / static_cast<double>(records.size());
    return m;
}

namespace {

constexpr const char* kModelFormat = "dlsim.model";
constexpr int kModelVersion = 1;

json tree_to_json(const RegressionTree& tree) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
        if (node.is_leaf())
            nodes.push_back({{"v", node.value}});
        else
            nodes.push_back({{"f", node.feature}, {"t", node.threshold}, {"l", node.left}, {"r", node.right}});
    }
    return nodes;
}

RegressionTree tree_from_json(const json& nodes) {
    RegressionTree tree;
    for (const auto& item : nodes) {
        TreeNode node;
        if (item.contains("v")) {
            node.value = item["v"].get<double>();
        } else {
            node.feature = item["f"].get<int>();
            node.threshold = item["t"].get<double>();
            node.left = item["l"].get<int>();
            node.right = item["r"].get<int>();
        }
        tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw std::runtime_error("model file: empty tree");
    for (const auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        const auto size = static_cast<int>(tree.nodes.size());
        if (node.left < 0 || node.left >= size || node.right < 0 || node.right >= size)
            throw std::runtime_error("model file: tree child index out of range");
    }
    return tree;
}

} // namespace

std::string model_to_json(const GbdtModel& model) {
    json doc;
    doc["format"] = kModelFormat;
    doc["version"] = kModelVersion;
    doc["variant"] = variant_name(model.variant);
    doc["base_score"] = model.base_score;
    doc["learning_rate"] = model.learning_rate;
    doc["feature_config"] = {{"hash_buckets", model.feature_config.hash_buckets},
                             {"keywords", model.feature_config.keywords},
                             {"hash_algo", model.feature_config.hash_algo}};
    doc["split"] = {{"seed", model.split.seed},
                    {"train_ratio", model.split.train_ratio},
                    {"calib_fraction", model.split.calib_fraction}};
    json trees = json::array();
    for (const auto& tree : model.trees) trees.push_back(tree_to_json(tree));
    doc["trees"] = std::move(trees);
    return doc.dump();
}

GbdtModel model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("model file: corrupt JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != kModelFormat)
        throw std::runtime_error("model file: not a dlsim model");
    if (doc.value("version", -1) != kModelVersion)
        throw std::runtime_error("model file: unsupported version " +
                                 std::to_string(doc.value("version", -1)));
    GbdtModel model;
    model.variant = parse_variant(doc["variant"].get<std::string>());
    model.base_score = doc["base_score"].get<double>();
    model.learning_rate = doc["learning_rate"].get<double>();
    const auto& fc = doc["feature_config"];
    model.feature_config.hash_buckets = fc["hash_buckets"].get<int>();
    model.feature_config.keywords = fc["keywords"].get<std::vector<std::string>>();
    model.feature_config.hash_algo = fc["hash_algo"].get<std::string>();
    if (doc.contains("split")) {
        model.split.seed = doc["split"]["seed"].get<uint64_t>();
        model.split.train_ratio = doc["split"]["train_ratio"].get<double>();
        model.split.calib_fraction = doc["split"]["calib_fraction"].get<double>();
    }
    for (const auto& tree : doc["trees"]) model.trees.push_back(tree_from_json(tree));
    return model;
}

void save_model(const GbdtModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << model_to_json(model) << "\n";
    if (!out) throw std::runtime_error(path + ": write failed");
}

GbdtModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return model_from_json(buffer.str());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

} // namespace dlsim
