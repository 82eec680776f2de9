#include <doctest.h>

#include <array>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"
#include "sectra/model.hpp"
#include "sectra/rng.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace sectra;
namespace ts = sectra::testsupport;
using sectra::testsupport::TempDir;

namespace {

Vector random_vector(Rng& rng, int dimension) {
  Vector v(dimension);
  for (int i = 0; i < dimension; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

std::array<Vector, 3> random_sections(Rng& rng, int dimension) {
  return {random_vector(rng, dimension), random_vector(rng, dimension),
          random_vector(rng, dimension)};
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  return a.dimension == b.dimension && a.heads == b.heads && a.alpha == b.alpha &&
         a.init_seed == b.init_seed && a.attention.wq == b.attention.wq &&
         a.attention.wk == b.attention.wk && a.attention.wv == b.attention.wv &&
         a.attention.wo == b.attention.wo && a.attention.bq == b.attention.bq &&
         a.attention.bk == b.attention.bk && a.attention.bv == b.attention.bv &&
         a.attention.bo == b.attention.bo && a.mlp.w1 == b.mlp.w1 && a.mlp.b1 == b.mlp.b1 &&
         a.mlp.w2 == b.mlp.w2 && a.mlp.b2 == b.mlp.b2;
}

}  // namespace

TEST_CASE("attention is permutation equivariant") {
  Rng rng(100);
  const std::array<std::array<int, 3>, 6> permutations = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams params = init_model(8, 2, 8, 0.3, rng.next());
    const std::array<Vector, 3> sections = random_sections(rng, 8);
    const AttentionOutput base = attend(params.attention, sections);
    for (const auto& perm : permutations) {
      std::array<Vector, 3> shuffled;
      for (int i = 0; i < 3; ++i) shuffled[i] = sections[static_cast<std::size_t>(perm[i])];
      const AttentionOutput permuted = attend(params.attention, shuffled);
      for (int i = 0; i < 3; ++i) {
        const Vector& expected = base.refined[static_cast<std::size_t>(perm[i])];
        CHECK((permuted.refined[i] - expected).cwiseAbs().maxCoeff() < 1e-9);
      }
    }
  }
}

TEST_CASE("attention rows are probability distributions") {
  Rng rng(101);
  const ModelParams params = init_model(16, 4, 16, 0.3, 7);
  const std::array<Vector, 3> sections = random_sections(rng, 16);
  const AttentionOutput output = attend(params.attention, sections);
  REQUIRE(output.head_weights.size() == 4);
  for (const Eigen::Matrix3d& weights : output.head_weights) {
    for (int row = 0; row < 3; ++row) {
      CHECK(std::abs(weights.row(row).sum() - 1.0) < 1e-9);
      for (int col = 0; col < 3; ++col) CHECK(weights(row, col) >= 0.0);
    }
  }
}

TEST_CASE("attention matches the straight-line oracle") {
  Rng rng(102);
  const ModelParams params = init_model(8, 2, 8, 0.3, 0);
  const std::array<Vector, 3> sections = random_sections(rng, 8);
  const AttentionOutput output = attend(params.attention, sections);

  std::array<ts::Flat, 3> flat_sections;
  for (int i = 0; i < 3; ++i) {
    flat_sections[i].assign(sections[i].data(), sections[i].data() + sections[i].size());
  }
  const ts::AttentionOracleResult oracle = ts::attention_oracle(params, flat_sections);

  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 8; ++j) {
      CHECK(output.refined[i][j] ==
            doctest::Approx(oracle.refined[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                .epsilon(1e-9));
    }
  }
  for (std::size_t h = 0; h < 2; ++h) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        CHECK(output.head_weights[h](r, c) ==
              doctest::Approx(oracle.head_weights[h][static_cast<std::size_t>(r)]
                                                   [static_cast<std::size_t>(c)])
                  .epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("attention validates dimensions") {
  const ModelParams params = init_model(8, 2, 8, 0.3, 0);
  std::array<Vector, 3> sections = {Vector::Zero(8), Vector::Zero(8), Vector::Zero(4)};
  CHECK_THROWS_AS(attend(params.attention, sections), DataError);
  CHECK_THROWS_AS(init_model(10, 4, 10, 0.3, 0), UsageError);  // 10 % 4 != 0
}

TEST_CASE("aggregate_sections is the componentwise mean") {
  const Vector v = (Vector(2) << 1.5, -2.0).finished();
  CHECK(aggregate_sections({v, v, v}) == v);

  const Vector a = (Vector(2) << 1, 0).finished();
  const Vector b = (Vector(2) << 0, 1).finished();
  const Vector c = (Vector(2) << -1, -1).finished();
  CHECK(aggregate_sections({a, b, c}) == Vector::Zero(2));

  const Vector d = (Vector(2) << 3, 0).finished();
  const Vector e = (Vector(2) << 0, 3).finished();
  const Vector f = (Vector(2) << 3, 3).finished();
  CHECK(aggregate_sections({d, e, f}) == (Vector(2) << 2, 2).finished());
}

TEST_CASE("combine reduces exactly at the alpha endpoints") {
  Rng rng(103);
  const Vector h_sections = random_vector(rng, 16);
  const Vector h_abstract = random_vector(rng, 16);
  CHECK(combine(h_sections, h_abstract, 0.0) == h_abstract);
  CHECK(combine(h_sections, h_abstract, 1.0) == h_sections);

  const Vector mixed = combine((Vector(2) << 1, 0).finished(),
                               (Vector(2) << 0, 1).finished(), 0.3);
  CHECK(mixed[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(mixed[1] == doctest::Approx(0.7).epsilon(1e-15));

  CHECK_THROWS_AS(combine(h_sections, h_abstract, 1.5), UsageError);
  CHECK_THROWS_AS(combine(h_sections, h_abstract, -0.1), UsageError);
}

TEST_CASE("combine is linear in its two inputs") {
  Rng rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector a = random_vector(rng, 8);
    const Vector b = random_vector(rng, 8);
    const double alpha = rng.uniform();
    const Vector lhs = combine(a, b, alpha) + combine(b, a, alpha);
    CHECK((lhs - (a + b)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mlp projection follows w2 relu(w1 h + b1) + b2") {
  MlpParams zero;
  zero.w1 = Eigen::MatrixXd::Zero(2, 2);
  zero.b1 = Eigen::VectorXd::Zero(2);
  zero.w2 = Eigen::MatrixXd::Zero(2, 2);
  zero.b2 = (Vector(2) << 5, -3).finished();
  CHECK(mlp_project(zero, (Vector(2) << 1, 1).finished()) == zero.b2);

  MlpParams identity;
  identity.w1 = Eigen::MatrixXd::Identity(2, 2);
  identity.b1 = Eigen::VectorXd::Zero(2);
  identity.w2 = Eigen::MatrixXd::Identity(2, 2);
  identity.b2 = Eigen::VectorXd::Zero(2);
  CHECK(mlp_project(identity, (Vector(2) << 1, -2).finished()) ==
        (Vector(2) << 1, 0).finished());  // relu clips the negative component

  Rng rng(105);
  const ModelParams params = init_model(8, 2, 6, 0.3, 12);
  const Vector input = random_vector(rng, 8);
  const Vector z = mlp_project(params.mlp, input);
  const ts::Flat oracle =
      ts::mlp_oracle(params, ts::Flat(input.data(), input.data() + input.size()));
  for (int i = 0; i < 8; ++i) {
    CHECK(z[i] == doctest::Approx(oracle[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("section weights average attention mass per column") {
  std::vector<Eigen::Matrix3d> uniform(4, Eigen::Matrix3d::Constant(1.0 / 3.0));
  const std::array<double, 3> w = section_weight_report(uniform);
  for (double value : w) CHECK(value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Eigen::Matrix3d first_column = Eigen::Matrix3d::Zero();
  first_column.col(0).setOnes();
  const std::array<double, 3> peaked = section_weight_report({first_column, first_column});
  CHECK(peaked[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(peaked[1] == 0.0);
  CHECK(peaked[2] == 0.0);

  Rng rng(106);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Eigen::Matrix3d> weights;
    for (int h = 0; h < 4; ++h) {
      Eigen::Matrix3d m;
      for (int r = 0; r < 3; ++r) {
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
          m(r, c) = rng.uniform();
          sum += m(r, c);
        }
        m.row(r) /= sum;
      }
      weights.push_back(m);
    }
    const std::array<double, 3> report = section_weight_report(weights);
    double total = 0.0;
    for (double value : report) {
      CHECK(value >= 0.0);
      total += value;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("represent with alpha 0 returns the abstract embedding bit for bit") {
  PaperRecord paper;
  paper.id = "p";
  paper.title = "A title";
  paper.abstract = "In recent years, things happened. We propose stuff. Results show gains.";
  HashedEmbedder provider(32, 0);
  PaperSectioner sectioner(std::make_shared<HeuristicClassifier>());
  const ModelParams params = init_model(32, 4, 32, 0.0, 5);

  const PaperRepresentation repr = represent(paper, provider, sectioner, params);
  CHECK(repr.h_paper == provider.embed(paper.abstract));
  CHECK(repr.h_abstract == provider.embed(paper.abstract));
}

TEST_CASE("all-residual abstracts embed the title for every section") {
  PaperRecord paper;
  paper.id = "p";
  paper.title = "Only Title";
  // Both sentences classify as objective -> residual.
  paper.abstract = "We aim to do something. We aim to do more.";
  HashedEmbedder provider(32, 0);
  PaperSectioner sectioner(std::make_shared<HeuristicClassifier>());
  const ModelParams params = init_model(32, 4, 32, 0.3, 5);

  const PaperRepresentation repr = represent(paper, provider, sectioner, params);
  const Vector title_vec = provider.embed(paper.title);
  CHECK(repr.h_background == title_vec);
  CHECK(repr.h_method == title_vec);
  CHECK(repr.h_results == title_vec);
}

TEST_CASE("represent requires a title") {
  PaperRecord paper;
  paper.id = "p";
  paper.abstract = "Text.";
  HashedEmbedder provider(16, 0);
  PaperSectioner sectioner(std::make_shared<HeuristicClassifier>());
  const ModelParams params = init_model(16, 2, 16, 0.3, 5);
  CHECK_THROWS_AS(represent(paper, provider, sectioner, params), DataError);
}

TEST_CASE("end-to-end representation matches the golden fixture") {
  std::ifstream in(std::string(SECTRA_TEST_DATA_DIR) + "/golden_representation.json");
  REQUIRE(in.good());
  const nlohmann::json golden = nlohmann::json::parse(in);

  PaperRecord paper;
  paper.id = golden.at("paper").at("id").get<std::string>();
  paper.title = golden.at("paper").at("title").get<std::string>();
  paper.abstract = golden.at("paper").at("abstract").get<std::string>();

  HashedEmbedder provider(32, golden.at("provider_seed").get<std::uint64_t>());
  PaperSectioner sectioner(std::make_shared<HeuristicClassifier>());
  const ModelParams params =
      init_model(32, 4, 32, golden.at("alpha").get<double>(),
                 golden.at("init_seed").get<std::uint64_t>());

  const PaperRepresentation repr = represent(paper, provider, sectioner, params);
  auto check_vector = [&](const char* name, const Vector& actual) {
    const auto& expected = golden.at(name);
    REQUIRE(static_cast<Eigen::Index>(expected.size()) == actual.size());
    for (Eigen::Index i = 0; i < actual.size(); ++i) {
      CHECK(actual[i] ==
            doctest::Approx(expected[static_cast<std::size_t>(i)].get<double>()).epsilon(1e-12));
    }
  };
  check_vector("h_sections", repr.h_sections);
  check_vector("h_abstract", repr.h_abstract);
  check_vector("h_paper", repr.h_paper);
  check_vector("z_paper", repr.z_paper);
  for (int i = 0; i < 3; ++i) {
    CHECK(repr.section_weights[static_cast<std::size_t>(i)] ==
          doctest::Approx(golden.at("section_weights")[static_cast<std::size_t>(i)].get<double>())
              .epsilon(1e-12));
  }
}

TEST_CASE("checkpoints round-trip exactly") {
  TempDir dir;
  const ModelParams params = init_model(16, 4, 12, 0.3, 99);
  save_checkpoint(params, dir.file("checkpoint.json"));
  const ModelParams loaded = load_checkpoint(dir.file("checkpoint.json"));
  CHECK(params_equal(params, loaded));

  SUBCASE("shape violations are fatal") {
    nlohmann::json object;
    {
      std::ifstream in(dir.file("checkpoint.json"));
      object = nlohmann::json::parse(in);
    }
    object["matrices"]["wq"].erase(0);
    {
      std::ofstream out(dir.file("broken.json"));
      out << object.dump();
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("broken.json")), doctest::Contains("wq"),
                         DataError);
  }
}

TEST_CASE("initialization is seed-deterministic") {
  const ModelParams a = init_model(16, 4, 16, 0.3, 42);
  const ModelParams b = init_model(16, 4, 16, 0.3, 42);
  const ModelParams c = init_model(16, 4, 16, 0.3, 43);
  CHECK(params_equal(a, b));
  CHECK_FALSE(params_equal(a, c));
  CHECK(a.attention.bq.isZero());
  CHECK(a.mlp.b2.isZero());
}
