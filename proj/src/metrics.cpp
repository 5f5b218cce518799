#include "stgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace stgan::metrics {

namespace {

void require_pairs(std::span<const EvalPair> pairs, std::string_view what) {
  if (pairs.empty()) throw std::invalid_argument(std::string(what) + ": empty corpus");
  for (const auto& p : pairs)
    if (p.references.empty())
      throw std::invalid_argument(std::string(what) + ": pair without a reference");
}

std::size_t closest_ref_length(const EvalPair& p) {
  const auto c = static_cast<long>(p.hypothesis.size());
  std::size_t best = p.references.front().size();
  for (const auto& r : p.references) {
    const auto d = std::labs(static_cast<long>(r.size()) - c);
    const auto bd = std::labs(static_cast<long>(best) - c);
    if (d < bd || (d == bd && r.size() < best)) best = r.size();
  }
  return best;
}

}  // namespace

NgramCounts ngram_counts(std::span<const std::string> tokens, std::size_t n) {
  if (n == 0) throw std::invalid_argument("ngram_counts: n must be >= 1");
  NgramCounts out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++out[Tokens(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

double bleu(std::span<const EvalPair> pairs, std::size_t max_n) {
  require_pairs(pairs, "bleu");
  if (max_n < 1 || max_n > 4) throw std::invalid_argument("bleu: max_n must be in 1..4");
  std::vector<double> matched(max_n, 0), total(max_n, 0);
  double c = 0, r = 0;
  for (const auto& p : pairs) {
    c += static_cast<double>(p.hypothesis.size());
    r += static_cast<double>(closest_ref_length(p));
    for (std::size_t k = 1; k <= max_n; ++k) {
      const auto hyp = ngram_counts(p.hypothesis, k);
      NgramCounts max_ref;
      for (const auto& ref : p.references)
        for (const auto& [g, n] : ngram_counts(ref, k)) max_ref[g] = std::max(max_ref[g], n);
      for (const auto& [g, n] : hyp) {
        auto it = max_ref.find(g);
        matched[k - 1] += static_cast<double>(std::min(n, it == max_ref.end() ? 0 : it->second));
        total[k - 1] += static_cast<double>(n);
      }
    }
  }
  if (c == 0) return 0.0;
  double log_sum = 0;
  for (std::size_t k = 0; k < max_n; ++k) {
    const double p = matched[k] > 0 ? matched[k] / total[k] : kBleuEpsilon;
    log_sum += std::log(p);
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge(std::span<const EvalPair> pairs, RougeVariant variant) {
  require_pairs(pairs, "rouge");
  double sum = 0;
  for (const auto& p : pairs) {
    double best = 0;
    for (const auto& ref : p.references) {
      double score = 0;
      if (variant == RougeVariant::L) {
        const auto l = static_cast<double>(lcs_length(p.hypothesis, ref));
        if (l > 0) {
          const double prec = l / static_cast<double>(p.hypothesis.size());
          const double rec = l / static_cast<double>(ref.size());
          score = 2 * prec * rec / (prec + rec);
        }
      } else {
        const std::size_t n = variant == RougeVariant::One ? 1 : 2;
        const auto hyp = ngram_counts(p.hypothesis, n);
        const auto refc = ngram_counts(ref, n);
        double overlap = 0, total = 0;
        for (const auto& [g, cnt] : refc) {
          total += static_cast<double>(cnt);
          auto it = hyp.find(g);
          if (it != hyp.end()) overlap += static_cast<double>(std::min(cnt, it->second));
        }
        score = total > 0 ? overlap / total : 0.0;
      }
      best = std::max(best, score);
    }
    sum += best;
  }
  return sum / static_cast<double>(pairs.size());
}

std::string stem(std::string_view word) {
  static constexpr std::array<std::string_view, 6> suffixes{"edly", "ing", "ed", "ly", "es", "s"};
  for (auto suf : suffixes)  // ordered longest first
    if (word.size() >= suf.size() + 3 && word.ends_with(suf))
      return std::string(word.substr(0, word.size() - suf.size()));
  return std::string(word);
}

Alignment align(std::span<const std::string> hyp, std::span<const std::string> ref) {
  std::vector<bool> hyp_used(hyp.size(), false), ref_used(ref.size(), false);
  Alignment out;
  auto stage = [&](auto&& same) {
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      if (hyp_used[i]) continue;
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (ref_used[j] || !same(hyp[i], ref[j])) continue;
        hyp_used[i] = ref_used[j] = true;
        out.links.emplace_back(i, j);
        break;
      }
    }
  };
  stage([](const std::string& a, const std::string& b) { return a == b; });
  stage([](const std::string& a, const std::string& b) { return stem(a) == stem(b); });
  std::sort(out.links.begin(), out.links.end());
  for (std::size_t k = 0; k < out.links.size(); ++k) {
    const bool continues = k > 0 && out.links[k].first == out.links[k - 1].first + 1 &&
                           out.links[k].second == out.links[k - 1].second + 1;
    if (!continues) ++out.chunks;
  }
  return out;
}

double meteor_sentence(std::span<const std::string> hyp, std::span<const std::string> ref) {
  const auto a = align(hyp, ref);
  const auto m = static_cast<double>(a.links.size());
  if (m == 0) return 0.0;
  const double prec = m / static_cast<double>(hyp.size());
  const double rec = m / static_cast<double>(ref.size());
  const double fmean = 10 * prec * rec / (rec + 9 * prec);
  const double frag = static_cast<double>(a.chunks) / m;
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double meteor_lite(std::span<const EvalPair> pairs) {
  require_pairs(pairs, "meteor");
  double sum = 0;
  for (const auto& p : pairs) {
    double best = 0;
    for (const auto& ref : p.references) best = std::max(best, meteor_sentence(p.hypothesis, ref));
    sum += best;
  }
  return sum / static_cast<double>(pairs.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: lengths differ");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw std::invalid_argument("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<std::array<double, 2>> RatingTable::row_percentages(Label actual) const {
  const auto& row = counts[static_cast<int>(actual)];
  const double total = row[0] + row[1];
  if (total == 0) {
    spdlog::warn("rating row '{}' has no weight; percentages undefined",
                 actual == Label::Real ? "real" : "fake");
    return std::nullopt;
  }
  return std::array<double, 2>{100.0 * row[0] / total, 100.0 * row[1] / total};
}

RatingTable weighted_human_scores(std::span<const Rating> ratings) {
  RatingTable t;
  for (const auto& r : ratings) {
    if (r.rating < 1 || r.rating > 5)
      throw std::invalid_argument("rating " + std::to_string(r.rating) + " outside 1..5");
    if (r.rating == 3) continue;
    const int judged = r.rating < 3 ? 0 : 1;
    t.counts[static_cast<int>(r.actual)][judged] += std::abs(r.rating - 3);
  }
  return t;
}

double compute_metric(std::string_view name, std::span<const EvalPair> pairs) {
  if (name.size() == 5 && name.starts_with("bleu") && name[4] >= '1' && name[4] <= '4')
    return bleu(pairs, static_cast<std::size_t>(name[4] - '0'));
  if (name == "rougeL" || name == "rouge") return rouge(pairs, RougeVariant::L);
  if (name == "rouge1") return rouge(pairs, RougeVariant::One);
  if (name == "rouge2") return rouge(pairs, RougeVariant::Two);
  if (name == "meteor") return meteor_lite(pairs);
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

std::vector<std::string> parse_metric_list(std::string_view list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    std::string name(list.substr(start, end - start));
    if (!name.empty()) {
      const std::array<EvalPair, 1> probe{EvalPair{{"x"}, {{"x"}}}};
      compute_metric(name, probe);  // validates the name
      out.push_back(std::move(name));
    }
    start = end + 1;
  }
  if (out.empty()) throw std::invalid_argument("empty metric list");
  return out;
}

void write_report_csv(const MetricReport& report, std::ostream& os) {
  if (report.rows.empty()) throw std::invalid_argument("report has no rows");
  for (const auto& r : report.rows)
    if (!(r.value >= 0.0 && r.value <= 1.0))
      throw std::invalid_argument("metric " + r.metric + " for " + r.model + " is outside [0,1]");
  os << "model,embedding,metric,value\n";
  char buf[32];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.value);
    os << r.model << ',' << r.embedding << ',' << r.metric << ',' << buf << '\n';
  }
}

MetricReport read_report_csv(std::istream& is) {
  MetricReport report;
  std::string line;
  if (!std::getline(is, line) || line != "model,embedding,metric,value")
    throw std::runtime_error("report csv: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    MetricRow row;
    std::string value;
    if (!std::getline(fields, row.model, ',') || !std::getline(fields, row.embedding, ',') ||
        !std::getline(fields, row.metric, ',') || !std::getline(fields, value))
      throw std::runtime_error("report csv: malformed row '" + line + "'");
    row.value = std::stod(value);
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_rating_csv(const RatingTable& table, std::ostream& os) {
  os << "actual,judged_real,judged_fake,pct_real,pct_fake\n";
  char buf[128];
  for (Label l : {Label::Real, Label::Fake}) {
    const auto& row = table.counts[static_cast<int>(l)];
    const auto pct = table.row_percentages(l);
    if (pct)
      std::snprintf(buf, sizeof buf, "%g,%g,%.2f,%.2f", row[0], row[1], (*pct)[0], (*pct)[1]);
    else
      std::snprintf(buf, sizeof buf, "%g,%g,,", row[0], row[1]);
    os << (l == Label::Real ? "real" : "fake") << ',' << buf << '\n';
  }
}

}  // namespace stgan::metrics
