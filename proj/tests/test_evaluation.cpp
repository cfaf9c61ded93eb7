#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "support.hpp"
#include "zsiis/evaluation.hpp"
#include "zsiis/image_io.hpp"
#include "zsiis/pipeline.hpp"

using namespace zsiis;
using zsiis::testing::random_image;
using zsiis::testing::random_model;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModelConfig small_config() {
  ModelConfig c;
  c.num_blocks = 2;
  c.growth = 6;
  c.num_subnet_layers = 3;
  return c;
}

std::vector<ImageTensor> images(int n, int size, std::mt19937_64& rng) {
  std::vector<ImageTensor> out;
  for (int i = 0; i < n; ++i) out.push_back(quantize8(random_image(3, size, size, rng)));
  return out;
}

// Brute-force balanced accuracy with the <= rule written out by hand.
double tally(const std::vector<double>& covers, const std::vector<double>& stegos, double t) {
  int tn = 0, tp = 0;
  for (double c : covers)
    if (!(c <= t) || c == kInf) ++tn;
  for (double s : stegos)
    if (s <= t && s != kInf) ++tp;
  return 0.5 * (static_cast<double>(tn) / covers.size() + static_cast<double>(tp) / stegos.size());
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("LamMode parsing") {
  CHECK(LamMode::parse("zero").kind == LamMode::Kind::zero);
  CHECK(LamMode::parse("uniform").kind == LamMode::Kind::uniform);
  const LamMode f = LamMode::parse("fixed:0.25");
  CHECK(f.kind == LamMode::Kind::fixed);
  CHECK(f.value == 0.25);
  CHECK(LamMode::parse(f.to_string()).value == 0.25);
  CHECK(LamMode::uniform().to_string() == "uniform");
  CHECK_THROWS_AS(LamMode::parse("fixed:2"), DomainError);
  CHECK_THROWS_AS(LamMode::parse("fixed:"), DomainError);
  CHECK_THROWS_AS(LamMode::parse("fixed:0.5x"), DomainError);
  CHECK_THROWS_AS(LamMode::parse("half"), DomainError);
}

TEST_CASE("summarize") {
  std::vector<double> v;
  for (int i = 11; i >= 1; --i) v.push_back(i);
  const PsnrStats s = summarize(v);
  CHECK(s.mean == 6.0);
  CHECK(s.min == 1.0);
  CHECK(s.max == 11.0);
  CHECK(s.std == doctest::Approx(std::sqrt(10.0)));
  for (int d = 0; d < 9; ++d) CHECK(s.deciles[d] == doctest::Approx(2.0 + d));

  const PsnrStats two = summarize({10.0, 20.0});
  CHECK(two.deciles[4] == 15.0);
  CHECK(two.deciles[0] == doctest::Approx(11.0));

  const PsnrStats with_inf = summarize({10.0, kInf});
  CHECK(with_inf.max == kInf);
  CHECK(with_inf.min == 10.0);
}

TEST_CASE("report arithmetic") {
  std::vector<double> covers(10, 30.0);
  std::vector<double> stegos(9, 15.0);
  stegos.push_back(26.0);
  const EvalReport r = make_report(covers, stegos, 25.0);
  CHECK(r.n_cover == 10);
  CHECK(r.n_stego == 10);
  CHECK(r.accuracy == doctest::Approx(0.95));
  CHECK(r.true_negative_rate == 1.0);
  CHECK(r.true_positive_rate == doctest::Approx(0.9));
  CHECK(r.cover_psnrs == covers);

  const EvalReport edge = make_report({25.0, kInf}, {25.0}, 25.0);
  CHECK(edge.true_negative_rate == 0.5);
  CHECK(edge.true_positive_rate == 1.0);

  const EvalReport none = make_report(covers, stegos, -kInf);
  CHECK(none.true_positive_rate == 0.0);
  CHECK(none.true_negative_rate == 1.0);
  CHECK(none.accuracy == 0.5);

  CHECK_THROWS_AS(make_report({}, {}, 25.0), DomainError);
}

TEST_CASE("evaluate_detection agrees with a brute-force tally") {
  std::mt19937_64 rng(1);
  const InnModel<float> model = random_model(small_config(), rng, 0.3);
  const auto covers = images(7, 8, rng);
  const auto stegos = images(5, 8, rng);

  // Threshold near the middle of the score range so both verdicts occur.
  std::mt19937_64 probe(2);
  const EvalReport first = evaluate_detection(model, covers, stegos, 25.0, probe);
  std::vector<double> all = first.cover_psnrs;
  all.insert(all.end(), first.stego_psnrs.begin(), first.stego_psnrs.end());
  std::sort(all.begin(), all.end());
  const double threshold = all[all.size() / 2];

  std::mt19937_64 eval(3);
  std::mt19937_64 replay = eval;
  const EvalReport r = evaluate_detection(model, covers, stegos, threshold, eval);

  int correct = 0, tp = 0;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < covers.size() + stegos.size(); ++i) seeds.push_back(replay());
  for (std::size_t i = 0; i < covers.size(); ++i) {
    std::mt19937_64 local(seeds[i]);
    const auto d = detect(model, covers[i], threshold, local);
    CHECK(d.psnr_db == r.cover_psnrs[i]);
    correct += d.psnr_db > threshold;
  }
  for (std::size_t i = 0; i < stegos.size(); ++i) {
    std::mt19937_64 local(seeds[covers.size() + i]);
    const auto d = detect(model, stegos[i], threshold, local);
    CHECK(d.psnr_db == r.stego_psnrs[i]);
    correct += d.psnr_db <= threshold;
    tp += d.psnr_db <= threshold;
  }
  CHECK(r.accuracy == doctest::Approx(correct / 12.0));
  CHECK(r.true_positive_rate == doctest::Approx(tp / 5.0));
  CHECK(r.accuracy > 0.0);
  CHECK(r.accuracy < 1.0);

  std::mt19937_64 low(3);
  const EvalReport none = evaluate_detection(model, covers, stegos, -kInf, low);
  CHECK(none.true_positive_rate == 0.0);
  CHECK(none.true_negative_rate == 1.0);

  std::mt19937_64 e(4);
  CHECK_THROWS_AS(evaluate_detection(model, {}, stegos, 25.0, e), DomainError);
  CHECK_THROWS_AS(evaluate_detection(model, covers, {}, 25.0, e), DomainError);
}

TEST_CASE("report JSON round trip") {
  EvalReport r = make_report({30.5, kInf, 41.25}, {12.0, 13.5}, 25.0);
  const nlohmann::json j = r;
  CHECK(j["cover_psnrs"][1] == "inf");
  CHECK(j["cover_psnr_stats"]["max"] == "inf");
  const EvalReport back = j.get<EvalReport>();
  CHECK(back.cover_psnrs == r.cover_psnrs);
  CHECK(back.stego_psnr_stats == r.stego_psnr_stats);
  CHECK(back.accuracy == r.accuracy);
  CHECK(nlohmann::json(back) == j);
  CHECK(nlohmann::json::parse(j.dump()).get<EvalReport>().cover_psnr_stats.max == kInf);
}

TEST_CASE("threshold sweep") {
  SUBCASE("separable") {
    const auto best = threshold_sweep({30, 32, 34}, {10, 12, 14});
    CHECK(best.balanced_accuracy == 1.0);
    CHECK(best.threshold_db == 22.0);
  }
  SUBCASE("interleaved identical lists") {
    const std::vector<double> v{10, 20, 30, 40};
    CHECK(threshold_sweep(v, v).balanced_accuracy == 0.5);
  }
  SUBCASE("inverted") {
    const auto best = threshold_sweep({20}, {30});
    CHECK(best.balanced_accuracy == 0.5);
    // Hand enumeration: below 20 -> (1+0)/2, between -> (0+0)/2, above 30 -> (0+1)/2.
    CHECK(balanced_accuracy({20}, {30}, 19) == 0.5);
    CHECK(balanced_accuracy({20}, {30}, 25) == 0.0);
    CHECK(balanced_accuracy({20}, {30}, 31) == 0.5);
  }
  SUBCASE("result beats every candidate") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> c(32, 4), s(22, 4);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> covers, stegos;
      for (int i = 0; i < 1 + trial % 10; ++i) covers.push_back(std::round(c(rng)));
      for (int i = 0; i < 1 + trial % 7; ++i) stegos.push_back(std::round(s(rng)));
      if (trial % 5 == 0) covers.push_back(kInf);
      const auto best = threshold_sweep(covers, stegos);
      CHECK(best.balanced_accuracy == doctest::Approx(tally(covers, stegos, best.threshold_db)));
      std::vector<double> all(covers);
      all.insert(all.end(), stegos.begin(), stegos.end());
      for (double a : all)
        for (double delta : {-1.0, -0.5, 0.0, 0.5, 1.0})
          CHECK(best.balanced_accuracy >= tally(covers, stegos, a + delta));
      for (const auto& p : sweep_curve(covers, stegos))
        CHECK(best.balanced_accuracy >= p.balanced_accuracy);
    }
  }
  SUBCASE("curve") {
    const auto curve = sweep_curve({30, 32}, {10, 20}, {25.0});
    bool has25 = false;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      has25 |= curve[i].threshold_db == 25.0;
      if (i) CHECK(curve[i - 1].threshold_db < curve[i].threshold_db);
    }
    CHECK(has25);
    CHECK(curve.front().threshold_db == 9.0);
    CHECK(curve.back().threshold_db == 33.0);
    CHECK(curve.size() == 5);
  }
  CHECK_THROWS_AS(threshold_sweep({}, {1.0}), DomainError);
  CHECK_THROWS_AS(threshold_sweep({1.0}, {}), DomainError);
}

TEST_CASE("lsb matching") {
  std::mt19937_64 rng(6);
  const ImageTensor cover = quantize8(random_image(3, 64, 64, rng));

  SUBCASE("matching payload leaves the image unchanged") {
    std::vector<int> bits;
    for (float v : cover.values()) bits.push_back(static_cast<int>(std::lround(v * 255)) & 1);
    CHECK(lsb_embed_bits(cover, rng, 1.0, bits) == cover);
    CHECK(lsb_embed_bits(cover, rng, 0.3, bits) == cover);
  }

  SUBCASE("changes are single 8-bit steps and bounded in count") {
    for (double bpp : {0.1, 0.5, 1.0}) {
      const ImageTensor stego = lsb_embed(cover, rng, bpp);
      std::size_t changed = 0;
      for (std::size_t i = 0; i < cover.size(); ++i) {
        const long a = std::lround(cover[i] * 255), b = std::lround(stego[i] * 255);
        CHECK(std::abs(a - b) <= 1);
        CHECK(stego[i] == static_cast<float>(b) / 255.0f);
        changed += a != b;
      }
      CHECK(changed <= static_cast<std::size_t>(std::ceil(bpp * cover.size())));
      CHECK(changed > 0);
    }
  }

  SUBCASE("1 bpp costs about 51.1 dB") {
    const double expected = 10.0 * std::log10(255.0 * 255.0 / 0.5);
    CHECK(expected == doctest::Approx(51.14).epsilon(1e-3));
    const ImageTensor big = quantize8(random_image(3, 128, 128, rng));
    const double p = psnr(big, lsb_embed(big, rng, 1.0));
    CHECK(p == doctest::Approx(expected).epsilon(0.005));
  }

  SUBCASE("saturated pixels move inward") {
    ImageTensor black(3, 8, 8), white(3, 8, 8);
    for (float& v : white.values()) v = 1.0f;
    std::vector<int> ones(black.size(), 1), zeros(white.size(), 0);
    const ImageTensor up = lsb_embed_bits(black, rng, 1.0, ones);
    const ImageTensor down = lsb_embed_bits(white, rng, 1.0, zeros);
    for (float v : up.values()) CHECK(v == 1.0f / 255.0f);
    for (float v : down.values()) CHECK(v == 254.0f / 255.0f);
  }

  CHECK_THROWS_AS(lsb_embed(cover, rng, 0.0), DomainError);
  CHECK_THROWS_AS(lsb_embed(cover, rng, 1.5), DomainError);
  CHECK_THROWS_AS(lsb_embed_bits(cover, rng, 1.0, {1, 0}), DimensionError);
}

TEST_CASE("generate_eval_stegos") {
  std::mt19937_64 rng(7);
  const InnModel<float> model = random_model(small_config(), rng, 0.3);
  const auto covers = images(3, 8, rng);
  const auto secrets = images(3, 8, rng);

  const auto zero = generate_eval_stegos(model, covers, secrets, LamMode::zero(), rng);
  REQUIRE(zero.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(zero[i] == quantize8(conceal(model, secrets[i], covers[i])));

  const auto one = generate_eval_stegos(model, covers, secrets, LamMode::fixed(1.0), rng);
  for (std::size_t i = 0; i < 3; ++i) CHECK(one[i] == quantize8(covers[i]));

  std::mt19937_64 a(8), b(8);
  CHECK(generate_eval_stegos(model, covers, secrets, LamMode::uniform(), a) ==
        generate_eval_stegos(model, covers, secrets, LamMode::uniform(), b));

  CHECK_THROWS_AS(generate_eval_stegos(model, covers, {secrets[0]}, LamMode::zero(), rng),
                  DimensionError);
}

TEST_CASE("psnr histogram") {
  std::mt19937_64 rng(9);
  const InnModel<float> model = random_model(small_config(), rng, 0.3);
  auto imgs = images(4, 8, rng);
  imgs.push_back(imgs[0]);
  const std::vector<std::string> ids{"a", "b", "c", "d", "a2"};

  std::mt19937_64 r1(10), r2(10);
  const auto rows = psnr_histogram(model, imgs, ids, "cover", r1);
  const auto again = psnr_histogram(model, imgs, ids, "cover", r2);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].image_id == ids[i]);
    CHECK(rows[i].label == "cover");
    CHECK(rows[i].psnr_db == again[i].psnr_db);
  }
  CHECK(rows[0].psnr_db != rows[4].psnr_db);

  const fs::path csv = fs::temp_directory_path() / "zsiis_test_hist.csv";
  write_histogram_csv(csv, rows);
  const auto text = lines(csv);
  REQUIRE(text.size() == 6);
  CHECK(text[0] == "image_id,label,psnr_db");
  CHECK(text[1].rfind("a,cover,", 0) == 0);
  fs::remove(csv);

  const fs::path sweep = fs::temp_directory_path() / "zsiis_test_sweep.csv";
  write_sweep_csv(sweep, sweep_curve({30, 32}, {10, 20}, {25.0}));
  const auto s = lines(sweep);
  CHECK(s[0] == "threshold_db,balanced_accuracy");
  CHECK(s.size() == 6);
  fs::remove(sweep);

  CHECK_THROWS_AS(psnr_histogram(model, {}, {}, "cover", rng), DomainError);
  CHECK_THROWS_AS(psnr_histogram(model, imgs, {"x"}, "cover", rng), DimensionError);
}

TEST_CASE("ablation harness") {
  std::mt19937_64 rng(11);
  const InnModel<float> model = random_model(small_config(), rng, 0.3);
  const InnModel<float> other = random_model(small_config(), rng, 0.3);
  const auto covers = images(4, 8, rng);
  const auto secrets = images(4, 8, rng);

  std::mt19937_64 a(12);
  const AblationReport same = run_ablation(model, model, covers, secrets, 25.0, a);
  REQUIRE(same.rows.size() == 2);
  for (const auto& row : same.rows) CHECK(row.with_ra == row.without_ra);
  CHECK(same.row("lam_uniform").with_ra.n_stego == 8);
  CHECK(same.row("lsb").with_ra.n_stego == 4);
  CHECK(same.row("lsb").with_ra.n_cover == 4);
  CHECK_THROWS_AS(same.row("missing"), DomainError);

  std::mt19937_64 b(12), c(12);
  const AblationReport r1 = run_ablation(model, other, covers, secrets, 25.0, b);
  const AblationReport r2 = run_ablation(model, other, covers, secrets, 25.0, c);
  CHECK(r1.row("lsb").without_ra == r2.row("lsb").without_ra);
  CHECK_FALSE(r1.row("lsb").with_ra.cover_psnrs == r1.row("lsb").without_ra.cover_psnrs);

  const std::string table = r1.table();
  CHECK(table.find("lam_uniform") != std::string::npos);
  CHECK(table.find("lsb") != std::string::npos);
  const nlohmann::json j = r1;
  CHECK(j.size() == 2);
  CHECK(j[0]["with_ra"].contains("accuracy"));
}
