#include <cmath>
#include <limits>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "varlab/domain.hpp"
#include "varlab/error.hpp"
#include "varlab/glyph.hpp"

using namespace varlab;
namespace vt = varlab::testing;

TEST(Domain, DefaultSpecIsValid) {
  const DomainSpec s = DomainSpec::default_spec();
  EXPECT_EQ(s.dim, 8);
  double total = 0;
  for (int k = 0; k < 6; ++k) {
    total += s.class_priors[k];
    EXPECT_GT(s.class_cov_scale[k], 0.0);
    EXPECT_NEAR(s.class_means[k].norm(), 4.0, 1e-12);
    for (int j = 0; j < k; ++j) EXPECT_NEAR(s.class_means[k].dot(s.class_means[j]), 0.0, 1e-12);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Domain, BadPriorsAreConfigErrors) {
  DomainSpec s = DomainSpec::default_spec();
  s.class_priors[0] += 0.1;
  try {
    s.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
  s = DomainSpec::default_spec();
  s.class_cov_scale[3] = 0.0;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Sample, ZeroItemsGivesEmptyDataset) {
  EXPECT_TRUE(sample_labeled(DomainSpec::default_spec(), 0, 1).empty());
}

TEST(Sample, SameSeedIsByteIdentical) {
  const DomainSpec s = DomainSpec::default_spec();
  vt::TempDir dir;
  write_dataset_jsonl(dir / "a.jsonl", sample_labeled(s, 500, 9));
  write_dataset_jsonl(dir / "b.jsonl", sample_labeled(s, 500, 9));
  EXPECT_EQ(read_text(dir / "a.jsonl"), read_text(dir / "b.jsonl"));
  write_dataset_jsonl(dir / "c.jsonl", sample_labeled(s, 500, 10));
  EXPECT_NE(read_text(dir / "a.jsonl"), read_text(dir / "c.jsonl"));
}

TEST(Sample, ClassCountsFollowBinomial) {
  const auto data = sample_labeled(DomainSpec::default_spec(), 60000, 123);
  std::array<int, 6> counts{};
  for (const auto& it : data.items) ++counts[static_cast<std::size_t>(it.label)];
  const double sd = std::sqrt(60000.0 * (1.0 / 6.0) * (5.0 / 6.0));
  for (int c : counts) EXPECT_LT(std::abs(c - 10000.0), 3.0 * sd);
}

TEST(Sample, JsonlRoundTrip) {
  vt::TempDir dir;
  LabeledDataset d = sample_labeled(DomainSpec::default_spec(), 20, 4);
  d.source = DatasetSource::kVarEmotionIndividual;
  d.participant = "obs-03";
  write_dataset_jsonl(dir / "d.jsonl", d);
  const LabeledDataset back = read_dataset_jsonl(dir / "d.jsonl");
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.source, d.source);
  EXPECT_EQ(back.participant, d.participant);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.items[i].label, d.items[i].label);
    EXPECT_EQ(back.items[i].embedding, d.items[i].embedding);
  }
}

TEST(Posterior, ClassMeanDominates) {
  const DomainSpec s = DomainSpec::default_spec();
  for (int k = 0; k < 6; ++k) {
    const EmotionProbs p = true_posterior(s, s.class_means[k]);
    EXPECT_GT(p[static_cast<std::size_t>(k)], 0.99);
  }
}

TEST(Posterior, MidpointIsSymmetric) {
  const DomainSpec s = DomainSpec::default_spec(0, 8, 12.0);
  const Embedding mid = 0.5 * (s.class_means[1] + s.class_means[4]);
  const EmotionProbs p = true_posterior(s, mid);
  EXPECT_NEAR(p[1], p[4], 1e-12);
  EXPECT_GT(p[1] + p[4], 0.99);
}

TEST(Posterior, MatchesTermByTermEvaluation) {
  // Non-default spec so that priors and scales all matter.
  DomainSpec s = DomainSpec::default_spec(0, 8, 3.0);
  s.class_priors = {0.1, 0.2, 0.3, 0.15, 0.15, 0.1};
  s.class_cov_scale = {1.0, 0.5, 2.0, 1.5, 0.8, 1.2};
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Embedding x = 2.0 * standard_normal(rng, 8);
    std::array<double, 6> joint{};
    double total = 0;
    for (int k = 0; k < 6; ++k) {
      const double var = s.class_cov_scale[k];
      double sq = 0;
      for (int i = 0; i < 8; ++i) sq += (x[i] - s.class_means[k][i]) * (x[i] - s.class_means[k][i]);
      joint[k] = s.class_priors[k] * std::pow(2 * M_PI * var, -4.0) * std::exp(-sq / (2 * var));
      total += joint[k];
    }
    const EmotionProbs p = true_posterior(s, x);
    double sum = 0;
    for (int k = 0; k < 6; ++k) {
      EXPECT_NEAR(p[k], joint[k] / total, 1e-12);
      EXPECT_GT(p[k], 0.0);
      sum += p[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Posterior, DimensionMismatch) {
  try {
    true_posterior(DomainSpec::default_spec(), Embedding::Zero(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInputShape);
  }
}

TEST(Posterior, BayesRuleReaches95Percent) {
  const DomainSpec s = DomainSpec::default_spec();
  const auto data = sample_labeled(s, 5000, 77);
  int correct = 0;
  for (const auto& it : data.items) {
    const EmotionProbs p = true_posterior(s, it.embedding);
    const int k = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += k == it.label;
  }
  EXPECT_GE(correct / 5000.0, 0.95);
}

TEST(Sentinels, PosteriorAboveThreshold) {
  const DomainSpec s = DomainSpec::default_spec();
  const auto pool = sentinel_pool(s, 3, 5);
  ASSERT_EQ(pool.size(), 18u);
  for (const auto& st : pool) EXPECT_GT(true_posterior(s, st.embedding)[static_cast<std::size_t>(st.truth)], 0.99);
}

TEST(Glyph, ZeroEmbeddingIsNeutral) {
  const GlyphParams g = embedding_to_glyph(Embedding::Zero(8));
  EXPECT_EQ(g.mouth_curvature, 0.0);
  EXPECT_EQ(g.eyebrow_angle, 0.0);
  EXPECT_EQ(g.eyebrow_height, 0.0);
  EXPECT_EQ(g.eye_openness, 0.0);
  EXPECT_EQ(g.mouth_openness, 0.0);
  EXPECT_EQ(g.face_tilt, 0.0);
}

TEST(Glyph, SaturatesAtInfinity) {
  // Coordinate 3 (happiness) pushes mouth curvature upward.
  Embedding x = Embedding::Zero(8);
  x[3] = std::numeric_limits<double>::infinity();
  EXPECT_EQ(embedding_to_glyph(x).mouth_curvature, 1.0);
  x[3] = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(embedding_to_glyph(x).mouth_curvature, -1.0);
  x[3] = 1e6;
  const GlyphParams g = embedding_to_glyph(x);
  for (double v : {g.mouth_curvature, g.eyebrow_angle, g.eyebrow_height, g.eye_openness, g.mouth_openness,
                   g.face_tilt})
    EXPECT_LE(std::abs(v), 1.0);
}

TEST(Glyph, TooFewCoordinatesIsConfigError) {
  try {
    embedding_to_glyph(Embedding::Zero(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Glyph, ClassMeansGiveDistinctFaces) {
  const DomainSpec s = DomainSpec::default_spec();
  std::vector<std::array<double, 6>> faces;
  for (int k = 0; k < 6; ++k) {
    const GlyphParams g = embedding_to_glyph(s.class_means[k]);
    faces.push_back({g.mouth_curvature, g.eyebrow_angle, g.eyebrow_height, g.eye_openness, g.mouth_openness,
                     g.face_tilt});
  }
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b) {
      double linf = 0;
      for (int i = 0; i < 6; ++i) linf = std::max(linf, std::abs(faces[a][i] - faces[b][i]));
      EXPECT_GT(linf, 0.1) << a << " vs " << b;
    }
}

namespace {

// Vertical offset of the first quadratic control point relative to the
// mouth's starting corner, parsed back out of the SVG text.
double mouth_control_offset(const std::string& svg) {
  const std::regex path(R"(class="mouth" d="M ([-0-9.]+) ([-0-9.]+) Q ([-0-9.]+) ([-0-9.]+))");
  std::smatch m;
  EXPECT_TRUE(std::regex_search(svg, m, path));
  return std::stod(m[4]) - std::stod(m[2]);
}

}  // namespace

TEST(Render, DeterministicAndFinite) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const GlyphParams g = embedding_to_glyph(3.0 * standard_normal(rng, 8));
    const std::string a = render_glyph(g, 256);
    EXPECT_EQ(a, render_glyph(g, 256));
    for (const char* bad : {"nan", "NaN", "inf", "Inf"}) EXPECT_EQ(a.find(bad), std::string::npos);
    EXPECT_EQ(a.rfind("<svg", 0), 0u);
    EXPECT_NE(a.find("</svg>"), std::string::npos);
  }
}

TEST(Render, MouthCurvatureFlipsControlPoint) {
  GlyphParams smile, frown;
  smile.mouth_curvature = 1.0;
  frown.mouth_curvature = -1.0;
  const double up = mouth_control_offset(render_glyph(smile, 256));
  const double down = mouth_control_offset(render_glyph(frown, 256));
  EXPECT_GT(up, 0.0);
  EXPECT_LT(down, 0.0);
}

TEST(Render, HasEveryFacePart) {
  const std::string svg = render_glyph(GlyphParams{}, 128);
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (auto p = svg.find(needle); p != std::string::npos; p = svg.find(needle, p + 1)) ++n;
    return n;
  };
  EXPECT_EQ(count("class=\"head\""), 1u);
  EXPECT_EQ(count("class=\"eye\""), 2u);
  EXPECT_EQ(count("class=\"brow\""), 2u);
  EXPECT_EQ(count("class=\"mouth\""), 1u);
}
