#include "zsiis/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "zsiis/image_io.hpp"
#include "zsiis/pipeline.hpp"

namespace zsiis {
namespace fs = std::filesystem;
using nlohmann::json;

LamMode LamMode::fixed(double lam) {
  if (!(lam >= 0.0 && lam <= 1.0))
    throw DomainError("fixed lambda must lie in [0,1], got " + std::to_string(lam));
  return {Kind::fixed, lam};
}

LamMode LamMode::parse(const std::string& text) {
  if (text == "zero") return zero();
  if (text == "uniform") return uniform();
  if (text.rfind("fixed:", 0) == 0) {
    const std::string num = text.substr(6);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size())
      throw DomainError("cannot parse lambda in '" + text + "'");
    return fixed(v);
  }
  throw DomainError("lam_mode must be zero, uniform or fixed:<lam>, got '" +
                    text + "'");
}

std::string LamMode::to_string() const {
  switch (kind) {
    case Kind::zero:
      return "zero";
    case Kind::uniform:
      return "uniform";
    case Kind::fixed: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "fixed:%.17g", value);
      return buf;
    }
  }
  return "zero";
}

std::vector<ImageTensor> generate_eval_stegos(const InnModel<float>& model,
                                              const std::vector<ImageTensor>& covers,
                                              const std::vector<ImageTensor>& secrets,
                                              LamMode mode, std::mt19937_64& rng) {
  if (covers.size() != secrets.size())
    throw DimensionError("generate_eval_stegos: " + std::to_string(covers.size()) +
                         " covers but " + std::to_string(secrets.size()) +
                         " secrets");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ImageTensor> stegos;
  stegos.reserve(covers.size());
  for (std::size_t i = 0; i < covers.size(); ++i) {
    double lam = 0.0;
    if (mode.kind == LamMode::Kind::uniform) lam = unit(rng);
    if (mode.kind == LamMode::Kind::fixed) lam = mode.value;
    const ImageTensor init = conceal(model, secrets[i], covers[i]);
    stegos.push_back(quantize8(residual_augment(covers[i], init, lam)));
  }
  return stegos;
}

namespace {

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  if (sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<std::uint64_t> split_seeds(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint64_t> seeds(n);
  for (auto& s : seeds) s = rng();
  return seeds;
}

}  // namespace

PsnrStats summarize(std::vector<double> values) {
  PsnrStats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / n);
  s.min = values.front();
  s.max = values.back();
  for (int d = 0; d < 9; ++d) s.deciles[d] = percentile(values, (d + 1) / 10.0);
  return s;
}

EvalReport make_report(std::vector<double> cover_psnrs,
                       std::vector<double> stego_psnrs, double threshold_db) {
  if (cover_psnrs.empty() && stego_psnrs.empty())
    throw DomainError("make_report: no images");
  EvalReport r;
  r.n_cover = static_cast<int>(cover_psnrs.size());
  r.n_stego = static_cast<int>(stego_psnrs.size());
  r.threshold_db = threshold_db;
  int tp = 0, tn = 0;
  for (double s : stego_psnrs) tp += classify(s, threshold_db) == Verdict::stego;
  for (double c : cover_psnrs) tn += classify(c, threshold_db) == Verdict::cover;
  r.accuracy = static_cast<double>(tp + tn) / (r.n_cover + r.n_stego);
  r.true_positive_rate = r.n_stego ? static_cast<double>(tp) / r.n_stego : 0.0;
  r.true_negative_rate = r.n_cover ? static_cast<double>(tn) / r.n_cover : 0.0;
  r.cover_psnr_stats = summarize(cover_psnrs);
  r.stego_psnr_stats = summarize(stego_psnrs);
  r.cover_psnrs = std::move(cover_psnrs);
  r.stego_psnrs = std::move(stego_psnrs);
  return r;
}

EvalReport evaluate_detection(const InnModel<float>& model,
                              const std::vector<ImageTensor>& covers,
                              const std::vector<ImageTensor>& stegos,
                              double threshold_db, std::mt19937_64& rng) {
  if (covers.empty() || stegos.empty())
    throw DomainError("evaluate_detection needs at least one cover and one stego");
  const auto seeds = split_seeds(covers.size() + stegos.size(), rng);
  std::vector<double> cover_scores, stego_scores;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    std::mt19937_64 local(seeds[i]);
    cover_scores.push_back(detect(model, covers[i], threshold_db, local).psnr_db);
  }
  for (std::size_t i = 0; i < stegos.size(); ++i) {
    std::mt19937_64 local(seeds[covers.size() + i]);
    stego_scores.push_back(detect(model, stegos[i], threshold_db, local).psnr_db);
  }
  return make_report(std::move(cover_scores), std::move(stego_scores), threshold_db);
}

namespace {

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double parse_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw FormatError("expected a number, got '" + s + "'");
}

json number_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_or_string(x));
  return a;
}

std::vector<double> parse_array(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(parse_number(x));
  return v;
}

}  // namespace

void to_json(json& j, const PsnrStats& s) {
  j = json{{"mean", number_or_string(s.mean)},
           {"std", number_or_string(s.std)},
           {"min", number_or_string(s.min)},
           {"max", number_or_string(s.max)},
           {"deciles", number_array({s.deciles.begin(), s.deciles.end()})}};
}

void from_json(const json& j, PsnrStats& s) {
  s.mean = parse_number(j.at("mean"));
  s.std = parse_number(j.at("std"));
  s.min = parse_number(j.at("min"));
  s.max = parse_number(j.at("max"));
  const auto d = parse_array(j.at("deciles"));
  if (d.size() != 9) throw FormatError("deciles must have 9 entries");
  std::copy(d.begin(), d.end(), s.deciles.begin());
}

void to_json(json& j, const EvalReport& r) {
  j = json{{"n_cover", r.n_cover},
           {"n_stego", r.n_stego},
           {"accuracy", r.accuracy},
           {"true_positive_rate", r.true_positive_rate},
           {"true_negative_rate", r.true_negative_rate},
           {"threshold_db", number_or_string(r.threshold_db)},
           {"cover_psnr_stats", r.cover_psnr_stats},
           {"stego_psnr_stats", r.stego_psnr_stats},
           {"cover_psnrs", number_array(r.cover_psnrs)},
           {"stego_psnrs", number_array(r.stego_psnrs)}};
}

void from_json(const json& j, EvalReport& r) {
  r.n_cover = j.at("n_cover").get<int>();
  r.n_stego = j.at("n_stego").get<int>();
  r.accuracy = j.at("accuracy").get<double>();
  r.true_positive_rate = j.at("true_positive_rate").get<double>();
  r.true_negative_rate = j.at("true_negative_rate").get<double>();
  r.threshold_db = parse_number(j.at("threshold_db"));
  j.at("cover_psnr_stats").get_to(r.cover_psnr_stats);
  j.at("stego_psnr_stats").get_to(r.stego_psnr_stats);
  r.cover_psnrs = parse_array(j.at("cover_psnrs"));
  r.stego_psnrs = parse_array(j.at("stego_psnrs"));
}

std::vector<HistogramRow> psnr_histogram(const InnModel<float>& model,
                                         const std::vector<ImageTensor>& images,
                                         const std::vector<std::string>& ids,
                                         const std::string& label,
                                         std::mt19937_64& rng) {
  if (images.empty()) throw DomainError("psnr_histogram: no images");
  if (ids.size() != images.size())
    throw DimensionError("psnr_histogram: one id per image required");
  const auto seeds = split_seeds(images.size(), rng);
  std::vector<HistogramRow> rows;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::mt19937_64 local(seeds[i]);
    rows.push_back({ids[i], label, psnr(images[i], reveal(model, images[i], local))});
  }
  return rows;
}

namespace {

std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_histogram_csv(const fs::path& path, const std::vector<HistogramRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "image_id,label,psnr_db\n";
  for (const auto& r : rows) out << r.image_id << ',' << r.label << ',' << format_db(r.psnr_db) << '\n';
}

double balanced_accuracy(const std::vector<double>& cover_psnrs,
                         const std::vector<double>& stego_psnrs,
                         double threshold_db) {
  if (cover_psnrs.empty() || stego_psnrs.empty())
    throw DomainError("balanced_accuracy needs both classes");
  const auto tp = std::count_if(stego_psnrs.begin(), stego_psnrs.end(),
                                [&](double s) { return classify(s, threshold_db) == Verdict::stego; });
  const auto tn = std::count_if(cover_psnrs.begin(), cover_psnrs.end(),
                                [&](double c) { return classify(c, threshold_db) == Verdict::cover; });
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(stego_psnrs.size()) +
                static_cast<double>(tn) / static_cast<double>(cover_psnrs.size()));
}

namespace {

struct Candidate {
  double threshold;
  // Score interval the candidate stands for.
  double lo, hi;
};

std::vector<Candidate> candidates(const std::vector<double>& cover_psnrs,
                                  const std::vector<double>& stego_psnrs) {
  if (cover_psnrs.empty() || stego_psnrs.empty())
    throw DomainError("threshold sweep needs both classes");
  std::vector<double> s(cover_psnrs);
  s.insert(s.end(), stego_psnrs.begin(), stego_psnrs.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::vector<Candidate> out;
  out.push_back({s.front() - 1.0, s.front() - 2.0, s.front()});
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double mid = std::isinf(s[i + 1]) ? s[i] + 1.0 : 0.5 * (s[i] + s[i + 1]);
    out.push_back({mid, s[i], s[i + 1]});
  }
  out.push_back({s.back() + 1.0, s.back(), s.back() + 2.0});
  return out;
}

}  // namespace

std::vector<SweepPoint> sweep_curve(const std::vector<double>& cover_psnrs,
                                    const std::vector<double>& stego_psnrs,
                                    const std::vector<double>& extra) {
  std::vector<double> thresholds;
  for (const auto& c : candidates(cover_psnrs, stego_psnrs)) thresholds.push_back(c.threshold);
  thresholds.insert(thresholds.end(), extra.begin(), extra.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<SweepPoint> points;
  for (double t : thresholds)
    points.push_back({t, balanced_accuracy(cover_psnrs, stego_psnrs, t)});
  return points;
}

SweepPoint threshold_sweep(const std::vector<double>& cover_psnrs,
                           const std::vector<double>& stego_psnrs) {
  const auto cands = candidates(cover_psnrs, stego_psnrs);
  std::vector<double> acc;
  for (const auto& c : cands) acc.push_back(balanced_accuracy(cover_psnrs, stego_psnrs, c.threshold));
  const double best = *std::max_element(acc.begin(), acc.end());

  SweepPoint result{cands.front().threshold, best};
  double best_width = -1.0;
  for (std::size_t i = 0; i < cands.size();) {
    if (acc[i] != best) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < cands.size() && acc[j + 1] == best) ++j;
    const double lo = cands[i].lo, hi = cands[j].hi;
    const double width = hi - lo;
    if (std::isfinite(width) ? width > best_width : best_width < 0.0) {
      best_width = std::isfinite(width) ? width : 0.0;
      result.threshold_db = std::isfinite(width) ? 0.5 * (lo + hi) : cands[i].threshold;
    }
    i = j + 1;
  }
  return result;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepPoint>& points) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "threshold_db,balanced_accuracy\n";
  for (const auto& p : points) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", p.balanced_accuracy);
    out << format_db(p.threshold_db) << ',' << buf << '\n';
  }
}

ImageTensor lsb_embed_bits(const ImageTensor& cover, std::mt19937_64& rng,
                           double payload_bpp, const std::vector<int>& bits) {
  if (!(payload_bpp > 0.0 && payload_bpp <= 1.0))
    throw DomainError("payload_bpp must lie in (0,1], got " + std::to_string(payload_bpp));
  const std::size_t n = cover.size();
  if (!bits.empty() && bits.size() != n)
    throw DimensionError("lsb_embed: one payload bit per sample required");
  std::vector<int> q(n);
  for (std::size_t i = 0; i < n; ++i)
    q[i] = static_cast<int>(std::lround(std::clamp(cover[i], 0.0f, 1.0f) * 255.0f));

  const auto m = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(payload_bpp * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t idx = order[i];
    const int bit = bits.empty() ? static_cast<int>(rng() & 1u) : bits[idx];
    const bool up = (rng() & 1u) != 0;
    if ((q[idx] & 1) == bit) continue;
    if (q[idx] == 0)
      q[idx] = 1;
    else if (q[idx] == 255)
      q[idx] = 254;
    else
      q[idx] += up ? 1 : -1;
  }
  ImageTensor out(cover.shape());
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(q[i]) / 255.0f;
  return out;
}

ImageTensor lsb_embed(const ImageTensor& cover, std::mt19937_64& rng, double payload_bpp) {
  return lsb_embed_bits(cover, rng, payload_bpp, {});
}

const AblationRow& AblationReport::row(const std::string& source) const {
  for (const auto& r : rows)
    if (r.source == source) return r;
  throw DomainError("no ablation row for source '" + source + "'");
}

std::string AblationReport::table() const {
  std::string out = "source        with-RA acc  w/o-RA acc  with-RA TPR  w/o-RA TPR\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s  %11.4f  %10.4f  %11.4f  %10.4f\n",
                  r.source.c_str(), r.with_ra.accuracy, r.without_ra.accuracy,
                  r.with_ra.true_positive_rate, r.without_ra.true_positive_rate);
    out += buf;
  }
  return out;
}

AblationReport run_ablation(const InnModel<float>& model_with_ra,
                            const InnModel<float>& model_without_ra,
                            const std::vector<ImageTensor>& covers,
                            const std::vector<ImageTensor>& secrets,
                            double threshold_db, std::mt19937_64& rng) {
  if (model_with_ra.config.channels_per_branch != model_without_ra.config.channels_per_branch)
    throw DimensionError("run_ablation: models expect different channel counts");
  const std::uint64_t gen_seed = rng();
  const std::uint64_t eval_seed = rng();
  std::mt19937_64 gen(gen_seed);

  std::vector<ImageTensor> pooled =
      generate_eval_stegos(model_with_ra, covers, secrets, LamMode::uniform(), gen);
  auto other = generate_eval_stegos(model_without_ra, covers, secrets, LamMode::uniform(), gen);
  pooled.insert(pooled.end(), std::make_move_iterator(other.begin()),
                std::make_move_iterator(other.end()));

  std::vector<ImageTensor> quantized, lsb;
  for (const auto& c : covers) {
    quantized.push_back(quantize8(c));
    lsb.push_back(lsb_embed(quantized.back(), gen, 1.0));
  }

  AblationReport report;
  for (const auto& [source, stegos] :
       {std::pair<std::string, const std::vector<ImageTensor>*>{"lam_uniform", &pooled},
        {"lsb", &lsb}}) {
    std::mt19937_64 a(eval_seed), b(eval_seed);
    report.rows.push_back({source,
                           evaluate_detection(model_with_ra, quantized, *stegos, threshold_db, a),
                           evaluate_detection(model_without_ra, quantized, *stegos, threshold_db, b)});
  }
  return report;
}

void to_json(json& j, const AblationReport& r) {
  j = json::array();
  for (const auto& row : r.rows)
    j.push_back({{"source", row.source}, {"with_ra", row.with_ra}, {"without_ra", row.without_ra}});
}

}  // namespace zsiis
