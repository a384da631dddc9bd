#include "cansave/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cansave/error.hpp"
#include "cansave/metrics.hpp"
#include "cansave/rng.hpp"

namespace cansave::boosting {
namespace {

using Json = nlohmann::ordered_json;

constexpr double kMinSplitGain = 1e-12;

double sigmoid(double m) {
  if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

double logistic_loss(double margin, int y) {
  // log(1 + exp(margin)) - y * margin, numerically stable on both sides.
  if (margin >= 0.0)
    return (1.0 - static_cast<double>(y)) * margin + std::log1p(std::exp(-margin));
  return -static_cast<double>(y) * margin + std::log1p(std::exp(margin));
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  MissingDir missing_dir = MissingDir::Left;
  double left_g = 0.0, left_h = 0.0;    // stats of the left child
  double right_g = 0.0, right_h = 0.0;  // stats of the right child
};

double half_score(double g, double h) { return h > 0.0 ? 0.5 * g * g / h : 0.0; }

// Considers both missing routings for one threshold and updates `best`.
// Deterministic preference: strictly larger gain wins, so the first candidate
// found (lowest feature index, lowest threshold) survives ties.
void consider_split(SplitCandidate& best, int feature, double threshold,
                    double left_g, double left_h, double right_g, double right_h,
                    double miss_g, double miss_h, double parent_score,
                    double min_child_weight) {
  for (int to_left = 1; to_left >= 0; --to_left) {
    const double gl = left_g + (to_left ? miss_g : 0.0);
    const double hl = left_h + (to_left ? miss_h : 0.0);
    const double gr = right_g + (to_left ? 0.0 : miss_g);
    const double hr = right_h + (to_left ? 0.0 : miss_h);
    if (hl < min_child_weight || hr < min_child_weight) continue;
    const double gain = half_score(gl, hl) + half_score(gr, hr) - parent_score;
    if (gain > best.gain) {
      best.gain = gain;
      best.feature = feature;
      best.threshold = threshold;
      best.missing_dir = to_left ? MissingDir::Left : MissingDir::Right;
      best.left_g = gl;
      best.left_h = hl;
      best.right_g = gr;
      best.right_h = hr;
    }
  }
}

// Per-feature presorted row order (non-missing rows only) plus missing lists;
// shared across rounds.
struct FeatureIndex {
  std::vector<std::vector<std::uint32_t>> sorted;   // [feature] rows by ascending value
  std::vector<std::vector<std::uint32_t>> missing;  // [feature] rows with NaN
};

FeatureIndex build_feature_index(const Dataset& data) {
  FeatureIndex fi;
  const std::size_t nf = data.n_features();
  fi.sorted.resize(nf);
  fi.missing.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& col = data.columns[f];
    auto& order = fi.sorted[f];
    order.reserve(col.size());
    for (std::uint32_t i = 0; i < col.size(); ++i) {
      if (std::isnan(col[i]))
        fi.missing[f].push_back(i);
      else
        order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&col](std::uint32_t a, std::uint32_t b) {
      return col[a] < col[b];
    });
  }
  return fi;
}

// Equal-width-in-quantile binning. When a feature has at most n_bins distinct
// values each value gets its own bin and thresholds reproduce exact greedy.
struct BinnedData {
  std::vector<std::vector<std::uint16_t>> bin_of;     // [feature][row], missing = 0xffff
  std::vector<std::vector<double>> upper_threshold;   // [feature][bin] split value after bin
  static constexpr std::uint16_t kMissingBin = 0xffff;
};

BinnedData build_bins(const Dataset& data, int n_bins) {
  BinnedData bd;
  const std::size_t nf = data.n_features();
  bd.bin_of.resize(nf);
  bd.upper_threshold.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& col = data.columns[f];
    std::vector<double> values;
    values.reserve(col.size());
    for (double v : col)
      if (!std::isnan(v)) values.push_back(v);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    std::vector<double> edges;  // ascending cut points; bin b = values in (edges[b-1], edges[b]]
    if (values.size() <= static_cast<std::size_t>(n_bins)) {
      for (std::size_t i = 0; i + 1 < values.size(); ++i)
        edges.push_back(0.5 * (values[i] + values[i + 1]));
    } else {
      for (int b = 1; b < n_bins; ++b) {
        const std::size_t pos = values.size() * static_cast<std::size_t>(b) /
                                static_cast<std::size_t>(n_bins);
        const double cut = 0.5 * (values[pos - 1] + values[pos]);
        if (edges.empty() || cut > edges.back()) edges.push_back(cut);
      }
    }
    bd.upper_threshold[f] = edges;
    auto& bins = bd.bin_of[f];
    bins.resize(col.size(), BinnedData::kMissingBin);
    for (std::size_t i = 0; i < col.size(); ++i) {
      if (std::isnan(col[i])) continue;
      const auto it = std::lower_bound(edges.begin(), edges.end(), col[i]);
      bins[i] = static_cast<std::uint16_t>(std::distance(edges.begin(), it));
    }
  }
  return bd;
}

struct NodeStats {
  double g = 0.0, h = 0.0;
  std::int64_t count = 0;
};

}  // namespace

double Tree::predict_margin(std::span<const double> row) const {
  int idx = 0;
  while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
    const double v = row[static_cast<std::size_t>(n.feature)];
    if (std::isnan(v))
      idx = n.missing_dir == MissingDir::Left ? n.left : n.right;
    else
      idx = v < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(idx)].leaf_value;
}

std::vector<double> Dataset::row(std::size_t i) const {
  std::vector<double> r(n_features());
  for (std::size_t f = 0; f < n_features(); ++f) r[f] = columns[f][i];
  return r;
}

Dataset Dataset::from_matrix(const features::FeatureMatrix& m) {
  Dataset d;
  d.feature_names = m.feature_names;
  d.feature_groups = m.feature_groups;
  if (d.feature_groups.empty()) d.feature_groups.assign(d.feature_names.size(), 0);
  d.labels = m.targets;
  d.columns.assign(m.feature_names.size(), {});
  for (auto& col : d.columns) col.resize(m.rows.size());
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    for (std::size_t f = 0; f < m.feature_names.size(); ++f)
      d.columns[f][r] = m.rows[r][f];
  return d;
}

Dataset Dataset::select(const std::vector<std::string>& names) const {
  Dataset out;
  out.labels = labels;
  for (const auto& name : names) {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end())
      throw SchemaError("Dataset::select: unknown feature '" + name + "'");
    const auto idx = static_cast<std::size_t>(std::distance(feature_names.begin(), it));
    out.feature_names.push_back(feature_names[idx]);
    out.feature_groups.push_back(idx < feature_groups.size() ? feature_groups[idx] : 0);
    out.columns.push_back(columns[idx]);
  }
  return out;
}

void TrainConfig::validate() const {
  if (max_depth < 1) throw ConfigError("train config: max_depth must be >= 1");
  if (n_rounds < 1) throw ConfigError("train config: n_rounds must be >= 1");
  if (!(learning_rate > 0.0) || learning_rate > 1.0)
    throw ConfigError("train config: learning_rate must be in (0, 1]");
  if (!(subsample > 0.0) || subsample > 1.0)
    throw ConfigError("train config: subsample must be in (0, 1]");
  if (min_child_weight < 0.0)
    throw ConfigError("train config: min_child_weight must be >= 0");
  if (n_bins < 2 || n_bins > 65000) throw ConfigError("train config: n_bins out of range");
}

double GBDTModel::predict_margin(std::span<const double> row) const {
  if (row.size() != feature_names.size())
    throw SchemaError("predict: feature vector width mismatch (got " +
                      std::to_string(row.size()) + ", model has " +
                      std::to_string(feature_names.size()) + ")");
  double m = base_score;
  for (const auto& t : trees) m += t.predict_margin(row);
  return m;
}

double GBDTModel::predict_risk(std::span<const double> row) const {
  return sigmoid(predict_margin(row));
}

std::vector<double> predict_risk(const GBDTModel& model, const Dataset& data) {
  if (data.feature_names != model.feature_names)
    throw SchemaError("predict: dataset schema does not match the model schema");
  std::vector<double> out(data.n_rows());
  std::vector<double> row(data.n_features());
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    for (std::size_t f = 0; f < data.n_features(); ++f) row[f] = data.columns[f][i];
    out[i] = model.predict_risk(row);
  }
  return out;
}

GBDTModel train_gbdt(const Dataset& train, const Dataset& validate,
                     const TrainConfig& config, std::vector<TrainLogRow>* log) {
  config.validate();
  const std::size_t n = train.n_rows();
  const std::size_t nf = train.n_features();
  if (n == 0 || nf == 0) throw SchemaError("train_gbdt: empty training data");
  for (const auto& col : train.columns)
    if (col.size() != n) throw SchemaError("train_gbdt: ragged columns");
  const bool has_validate = validate.n_rows() > 0;
  if (has_validate && validate.feature_names != train.feature_names)
    throw SchemaError("train_gbdt: train/validate schema mismatch");

  std::size_t n_pos = 0;
  for (int y : train.labels) {
    if (y != 0 && y != 1) throw SchemaError("train_gbdt: labels must be 0/1");
    n_pos += y;
  }
  if (n_pos == 0 || n_pos == n)
    throw SchemaError("train_gbdt: training set must contain both classes");

  const double w_pos =
      config.weight_classes ? static_cast<double>(n - n_pos) / static_cast<double>(n_pos)
                            : 1.0;
  const double prior =
      config.weight_classes
          ? 0.5
          : static_cast<double>(n_pos) / static_cast<double>(n);

  GBDTModel model;
  model.base_score = std::log(prior / (1.0 - prior));
  model.learning_rate = config.learning_rate;
  model.feature_names = train.feature_names;
  model.feature_groups = train.feature_groups;
  model.seed = config.seed;

  const bool use_hist =
      config.split_mode == TrainConfig::SplitMode::Histogram ||
      (config.split_mode == TrainConfig::SplitMode::Auto &&
       n >= config.histogram_row_threshold);

  FeatureIndex findex;
  BinnedData binned;
  if (use_hist)
    binned = build_bins(train, config.n_bins);
  else
    findex = build_feature_index(train);

  // Row-major copies for prediction during training.
  std::vector<double> train_rows(n * nf);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t i = 0; i < n; ++i) train_rows[i * nf + f] = train.columns[f][i];
  std::vector<double> validate_rows(validate.n_rows() * nf);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t i = 0; i < validate.n_rows(); ++i)
      validate_rows[i * nf + f] = validate.columns[f][i];

  std::vector<double> margin(n, model.base_score);
  std::vector<double> val_margin(validate.n_rows(), model.base_score);
  std::vector<double> grad(n), hess(n);
  std::vector<std::int32_t> node_of_row(n);
  std::vector<std::uint8_t> in_sample(n, 1);

  double best_ap = -1.0;
  int best_round = -1;
  int rounds_since_best = 0;

  for (int round = 0; round < config.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      const double w = train.labels[i] ? w_pos : 1.0;
      grad[i] = w * (p - static_cast<double>(train.labels[i]));
      hess[i] = w * p * (1.0 - p);
    }
    if (config.subsample < 1.0) {
      Rng rng(derive_seed(config.seed, 0x5ab5u + static_cast<std::uint64_t>(round)));
      for (std::size_t i = 0; i < n; ++i)
        in_sample[i] = rng.uniform01() < config.subsample ? 1 : 0;
    }

    // ---- grow one tree, level by level ----
    Tree tree;
    std::vector<NodeStats> stats;
    tree.nodes.emplace_back();
    stats.emplace_back();
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_sample[i]) {
        node_of_row[i] = -1;
        continue;
      }
      node_of_row[i] = 0;
      stats[0].g += grad[i];
      stats[0].h += hess[i];
      ++stats[0].count;
    }

    std::size_t level_start = 0;
    std::size_t level_end = 1;
    for (int depth = 0; depth < config.max_depth && level_start < level_end; ++depth) {
      const std::size_t n_level = level_end - level_start;
      std::vector<SplitCandidate> best(n_level);
      std::vector<double> parent_score(n_level);
      for (std::size_t k = 0; k < n_level; ++k)
        parent_score[k] = half_score(stats[level_start + k].g, stats[level_start + k].h);

      std::vector<double> miss_g(n_level), miss_h(n_level);
      std::vector<double> acc_g(n_level), acc_h(n_level), prev_val(n_level);
      std::vector<std::int64_t> acc_cnt(n_level), miss_cnt(n_level);

      for (std::size_t f = 0; f < nf; ++f) {
        std::fill(miss_g.begin(), miss_g.end(), 0.0);
        std::fill(miss_h.begin(), miss_h.end(), 0.0);
        std::fill(miss_cnt.begin(), miss_cnt.end(), std::int64_t{0});
        std::fill(acc_g.begin(), acc_g.end(), 0.0);
        std::fill(acc_h.begin(), acc_h.end(), 0.0);
        std::fill(acc_cnt.begin(), acc_cnt.end(), std::int64_t{0});

        const auto row_level_slot = [&](std::uint32_t i) -> std::ptrdiff_t {
          const std::int32_t node = node_of_row[i];
          if (node < static_cast<std::int32_t>(level_start) ||
              node >= static_cast<std::int32_t>(level_end))
            return -1;
          return node - static_cast<std::int32_t>(level_start);
        };

        if (use_hist) {
          const auto& bins = binned.bin_of[f];
          const auto& edges = binned.upper_threshold[f];
          if (edges.empty()) continue;  // constant feature
          const std::size_t n_bins_f = edges.size() + 1;
          std::vector<double> hg(n_level * n_bins_f, 0.0), hh(n_level * n_bins_f, 0.0);
          std::vector<std::int64_t> hc(n_level * n_bins_f, 0);
          for (std::uint32_t i = 0; i < n; ++i) {
            const auto slot = row_level_slot(i);
            if (slot < 0) continue;
            const std::uint16_t b = bins[i];
            if (b == BinnedData::kMissingBin) {
              miss_g[static_cast<std::size_t>(slot)] += grad[i];
              miss_h[static_cast<std::size_t>(slot)] += hess[i];
              ++miss_cnt[static_cast<std::size_t>(slot)];
            } else {
              const std::size_t o = static_cast<std::size_t>(slot) * n_bins_f + b;
              hg[o] += grad[i];
              hh[o] += hess[i];
              ++hc[o];
            }
          }
          for (std::size_t k = 0; k < n_level; ++k) {
            const NodeStats& ns = stats[level_start + k];
            if (ns.count < 2) continue;
            double cg = 0.0, ch = 0.0;
            std::int64_t cc = 0;
            const double nm_g = ns.g - miss_g[k], nm_h = ns.h - miss_h[k];
            for (std::size_t b = 0; b + 1 < n_bins_f; ++b) {
              const std::size_t o = k * n_bins_f + b;
              cg += hg[o];
              ch += hh[o];
              cc += hc[o];
              if (cc == 0) continue;
              consider_split(best[k], static_cast<int>(f), edges[b], cg, ch, nm_g - cg,
                             nm_h - ch, miss_g[k], miss_h[k], parent_score[k],
                             config.min_child_weight);
            }
          }
        } else {
          for (const std::uint32_t i : findex.missing[f]) {
            const auto slot = row_level_slot(i);
            if (slot < 0) continue;
            miss_g[static_cast<std::size_t>(slot)] += grad[i];
            miss_h[static_cast<std::size_t>(slot)] += hess[i];
            ++miss_cnt[static_cast<std::size_t>(slot)];
          }
          const auto& col = train.columns[f];
          for (const std::uint32_t i : findex.sorted[f]) {
            const auto slot_s = row_level_slot(i);
            if (slot_s < 0) continue;
            const auto k = static_cast<std::size_t>(slot_s);
            const double v = col[i];
            if (acc_cnt[k] > 0 && v > prev_val[k]) {
              const NodeStats& ns = stats[level_start + k];
              const double nm_g = ns.g - miss_g[k], nm_h = ns.h - miss_h[k];
              consider_split(best[k], static_cast<int>(f), 0.5 * (prev_val[k] + v),
                             acc_g[k], acc_h[k], nm_g - acc_g[k], nm_h - acc_h[k],
                             miss_g[k], miss_h[k], parent_score[k],
                             config.min_child_weight);
            }
            acc_g[k] += grad[i];
            acc_h[k] += hess[i];
            ++acc_cnt[k];
            prev_val[k] = v;
          }
        }
      }

      // Materialize accepted splits and route rows to children.
      bool any_split = false;
      for (std::size_t k = 0; k < n_level; ++k) {
        if (best[k].gain <= kMinSplitGain || best[k].feature < 0) continue;
        any_split = true;
        const std::size_t node_id = level_start + k;
        TreeNode& nd = tree.nodes[node_id];
        nd.feature = best[k].feature;
        nd.threshold = best[k].threshold;
        nd.missing_dir = best[k].missing_dir;
        nd.gain = best[k].gain;
        nd.left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        stats.push_back({best[k].left_g, best[k].left_h, 0});
        nd.right = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        stats.push_back({best[k].right_g, best[k].right_h, 0});
      }
      if (!any_split) break;

      for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t node = node_of_row[i];
        if (node < static_cast<std::int32_t>(level_start) ||
            node >= static_cast<std::int32_t>(level_end))
          continue;
        const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
        if (nd.feature < 0) continue;
        const double v = train.columns[static_cast<std::size_t>(nd.feature)][i];
        int child;
        if (std::isnan(v))
          child = nd.missing_dir == MissingDir::Left ? nd.left : nd.right;
        else
          child = v < nd.threshold ? nd.left : nd.right;
        node_of_row[i] = child;
        ++stats[static_cast<std::size_t>(child)].count;
      }
      level_start = level_end;
      level_end = tree.nodes.size();
    }

    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      TreeNode& nd = tree.nodes[k];
      if (nd.feature >= 0) continue;
      nd.leaf_value =
          stats[k].h > 0.0 ? -config.learning_rate * stats[k].g / stats[k].h : 0.0;
    }

    model.trees.push_back(std::move(tree));
    const Tree& grown = model.trees.back();
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of_row[i] >= 0)  // in-sample rows already sit in their leaf
        margin[i] += grown.nodes[static_cast<std::size_t>(node_of_row[i])].leaf_value;
      else
        margin[i] += grown.predict_margin(
            std::span<const double>(train_rows.data() + i * nf, nf));
    }

    double train_loss = 0.0;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = train.labels[i] ? w_pos : 1.0;
      train_loss += w * logistic_loss(margin[i], train.labels[i]);
      weight_sum += w;
    }
    train_loss /= weight_sum;

    double val_ap = 0.0;
    if (has_validate) {
      for (std::size_t i = 0; i < validate.n_rows(); ++i)
        val_margin[i] += grown.predict_margin(
            std::span<const double>(validate_rows.data() + i * nf, nf));
      val_ap = metrics::average_precision(val_margin, validate.labels);
      if (val_ap > best_ap) {
        best_ap = val_ap;
        best_round = round;
        rounds_since_best = 0;
      } else {
        ++rounds_since_best;
      }
    }
    if (log) log->push_back({round, train_loss, val_ap});

    if (has_validate && config.early_stopping_rounds > 0 &&
        rounds_since_best >= config.early_stopping_rounds)
      break;
  }

  model.rounds_trained = static_cast<int>(model.trees.size());
  if (has_validate && best_round >= 0) {
    model.best_round = best_round;
    model.trees.resize(static_cast<std::size_t>(best_round) + 1);
  } else {
    model.best_round = model.rounds_trained - 1;
  }
  return model;
}

std::map<std::string, double> gain_importance(const GBDTModel& model) {
  std::vector<double> totals(model.feature_names.size(), 0.0);
  double sum = 0.0;
  for (const auto& tree : model.trees) {
    for (const auto& nd : tree.nodes) {
      if (nd.feature < 0) continue;
      totals[static_cast<std::size_t>(nd.feature)] += nd.gain;
      sum += nd.gain;
    }
  }
  std::map<std::string, double> out;
  for (std::size_t f = 0; f < totals.size(); ++f)
    out[model.feature_names[f]] = sum > 0.0 ? totals[f] / sum * 100.0 : 0.0;
  return out;
}

std::map<std::string, double> permutation_importance(const GBDTModel& model,
                                                     const Dataset& data, int n_repeats,
                                                     std::uint64_t seed) {
  if (n_repeats < 1) throw ConfigError("permutation_importance: n_repeats must be >= 1");
  std::vector<bool> used(model.feature_names.size(), false);
  for (const auto& tree : model.trees)
    for (const auto& nd : tree.nodes)
      if (nd.feature >= 0) used[static_cast<std::size_t>(nd.feature)] = true;

  const auto base_scores = predict_risk(model, data);
  const double base_ap = metrics::average_precision(base_scores, data.labels);

  std::map<std::string, double> out;
  Dataset shuffled = data;
  for (std::size_t f = 0; f < model.feature_names.size(); ++f) {
    if (!used[f]) {
      out[model.feature_names[f]] = 0.0;
      continue;
    }
    double drop_sum = 0.0;
    for (int rep = 0; rep < n_repeats; ++rep) {
      Rng rng(derive_seed(seed, 0x9e2au + f * 1000003ull + static_cast<std::uint64_t>(rep)));
      shuffled.columns[f] = data.columns[f];
      rng.shuffle(shuffled.columns[f]);
      const auto scores = predict_risk(model, shuffled);
      drop_sum += base_ap - metrics::average_precision(scores, shuffled.labels);
    }
    shuffled.columns[f] = data.columns[f];
    out[model.feature_names[f]] = drop_sum / n_repeats;
  }
  return out;
}

features::FeatureSchema ablate_survival_features(const features::FeatureSchema& schema) {
  features::FeatureSchema out;
  for (const auto& d : schema.defs)
    if (d.group != 'i') out.defs.push_back(d);
  return out;
}

Dataset ablate_survival_features(const Dataset& data) {
  Dataset out;
  out.labels = data.labels;
  for (std::size_t f = 0; f < data.n_features(); ++f) {
    if (f < data.feature_groups.size() && data.feature_groups[f] == 'i') continue;
    out.feature_names.push_back(data.feature_names[f]);
    out.feature_groups.push_back(f < data.feature_groups.size() ? data.feature_groups[f] : 0);
    out.columns.push_back(data.columns[f]);
  }
  return out;
}

std::vector<double> aft_as_classifier(const survival::AFTModel& model,
                                      const std::vector<cohort::LabeledWindow>& windows,
                                      double horizon_years) {
  std::vector<double> scores;
  scores.reserve(windows.size());
  for (const auto& w : windows) {
    const auto x = features::aft_covariates_from_window(w);
    const double s_now = survival::aft_survival(model, w.age_at_pred, x);
    if (s_now <= 0.0) {
      scores.push_back(1.0);
      continue;
    }
    const double s_later = survival::aft_survival(model, w.age_at_pred + horizon_years, x);
    scores.push_back(1.0 - s_later / s_now);
  }
  return scores;
}

std::string gbdt_to_json(const GBDTModel& model) {
  Json j;
  j["base_score"] = model.base_score;
  j["learning_rate"] = model.learning_rate;
  j["feature_names"] = model.feature_names;
  j["feature_groups"] = std::string(model.feature_groups.begin(), model.feature_groups.end());
  j["meta"] = {{"best_round", model.best_round},
               {"rounds_trained", model.rounds_trained},
               {"seed", model.seed}};
  Json trees = Json::array();
  for (const auto& t : model.trees) {
    Json nodes = Json::array();
    for (const auto& nd : t.nodes) {
      Json o;
      o["feature"] = nd.feature;
      o["threshold"] = nd.threshold;
      o["missing_dir"] = nd.missing_dir == MissingDir::Left ? "left" : "right";
      o["left"] = nd.left;
      o["right"] = nd.right;
      o["leaf_value"] = nd.leaf_value;
      o["gain"] = nd.gain;
      nodes.push_back(std::move(o));
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees);
  return j.dump();
}

GBDTModel gbdt_from_json(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed GBDT model file: ") + e.what());
  }
  GBDTModel m;
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  const auto groups = j.value("feature_groups", std::string());
  m.feature_groups.assign(groups.begin(), groups.end());
  if (j.contains("meta")) {
    m.best_round = j["meta"].value("best_round", -1);
    m.rounds_trained = j["meta"].value("rounds_trained", 0);
    m.seed = j["meta"].value("seed", std::uint64_t{0});
  }
  for (const auto& t : j.at("trees")) {
    Tree tree;
    for (const auto& o : t.at("nodes")) {
      TreeNode nd;
      nd.feature = o.at("feature").get<int>();
      nd.threshold = o.at("threshold").get<double>();
      nd.missing_dir =
          o.at("missing_dir").get<std::string>() == "left" ? MissingDir::Left
                                                           : MissingDir::Right;
      nd.left = o.at("left").get<int>();
      nd.right = o.at("right").get<int>();
      nd.leaf_value = o.at("leaf_value").get<double>();
      nd.gain = o.value("gain", 0.0);
      tree.nodes.push_back(nd);
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

GBDTModel gbdt_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open GBDT model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return gbdt_from_json(ss.str());
}

void gbdt_to_file(const std::string& path, const GBDTModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write GBDT model file '" + path + "'");
  out << gbdt_to_json(model) << '\n';
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write training log '" + path + "'");
  out << "round,train_loss,validate_ap\n";
  char buf[80];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", r.round, r.train_loss, r.validate_ap);
    out << buf;
  }
}

}  // namespace cansave::boosting
