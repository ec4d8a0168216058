#include <gtest/gtest.h>
#include <omp.h>

#include <filesystem>

#include "naa/harness.hpp"
#include "naa/model_io.hpp"

using namespace naa;

namespace {

Network<float> tiny(bool conv_first) {
  using L = Layer<float>;
  std::vector<L> layers;
  if (conv_first) {
    layers = {L::conv2d(3, 4, 3, 1, 1), L::relu(), L::maxpool2d(2, 2), L::flatten(), L::dense(64, 10), L::logits()};
  } else {
    layers = {L::flatten(), L::dense(192, 24), L::relu(), L::dense(24, 10), L::logits()};
  }
  std::vector<std::size_t> taps;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) taps.push_back(i);
  return Network<float>({3, 8, 8}, std::move(layers), 10, taps);
}

struct TinyWorld {
  Zoo<float> zoo;
  Dataset test;
};

const TinyWorld& world() {
  static const TinyWorld w = [] {
    SyntheticOptions o;
    o.size = 8;
    o.count = 400;
    const Dataset train = generate_synthetic(o);
    o.first_index = 400;
    o.count = 40;
    TinyWorld tw;
    tw.test = generate_synthetic(o);
    TrainOptions t;
    t.epochs = 4;
    t.learning_rate = 0.05;
    for (bool conv : {true, false}) {
      Network<float> m = tiny(conv);
      init_params(m, conv ? 1 : 2);
      tw.zoo.models.push_back(sgd_train(m, train, t).model);
      ManifestModel mm;
      mm.name = conv ? "conv" : "mlp";
      mm.tap = conv ? 1 : 2;
      mm.valid_taps = tw.zoo.models.back().taps();
      tw.zoo.manifest.models.push_back(mm);
    }
    return tw;
  }();
  return w;
}

EvalOptions small_eval() {
  EvalOptions o;
  o.images = 12;
  o.config.steps = 4;
  o.config.iterations = 4;
  o.config.fia_ensemble = 3;
  return o;
}

}  // namespace

TEST(Harness, TinyZooLearnedSomething) {
  for (const auto& m : world().zoo.models) EXPECT_GT(accuracy(m, world().test), 0.3);
}

TEST(Harness, EmptyEvaluationSetIsRejected) {
  EvalOptions o = small_eval();
  o.images = 0;
  try {
    run_transfer_matrix(world().zoo, world().test, o);
    FAIL();
  } catch (const ValueError& e) {
    EXPECT_NE(std::string(e.what()).find("empty evaluation set"), std::string::npos);
  }
  o.images = 41;
  EXPECT_THROW(run_transfer_matrix(world().zoo, world().test, o), ValueError);
}

TEST(Harness, MatrixCellsAreWellFormed) {
  const EvalReport r = run_transfer_matrix(world().zoo, world().test, small_eval());
  EXPECT_EQ(r.cells.size(), 2u * 5u * 2u);
  for (const auto& c : r.cells) {
    EXPECT_GE(c.asr, 0.0);
    EXPECT_LE(c.asr, 1.0);
    EXPECT_LE(c.success, c.total);
    EXPECT_EQ(c.white_box, c.source == c.target);
  }
  EXPECT_EQ(r.cell("conv", "naa", "mlp").total, r.benign_correct[1]);
  EXPECT_EQ(r.source_taps, (std::vector<std::size_t>{1, 2}));
  const std::string csv = r.matrix_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "source,attack,target,white_box,success,total,asr");
  EXPECT_NE(r.table_markdown().find("*"), std::string::npos);
}

TEST(Harness, ReportBytesIndependentOfThreadCount) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const EvalReport a = run_transfer_matrix(world().zoo, world().test, small_eval());
  omp_set_num_threads(3);
  const EvalReport b = run_transfer_matrix(world().zoo, world().test, small_eval());
  omp_set_num_threads(saved);
  EXPECT_EQ(a.report_json(), b.report_json());
  EXPECT_EQ(a.matrix_csv(), b.matrix_csv());
}

TEST(Harness, ThreadLimitComesFromTheEnvironment) {
  const int saved = omp_get_max_threads();
  setenv("NAA_THREADS", "2", 1);
  EXPECT_EQ(apply_thread_limit(), 2);
  unsetenv("NAA_THREADS");
  omp_set_num_threads(saved);
}

TEST(Ablation, InvalidTapListsValidTaps) {
  AblationSpec s;
  s.axis = AblationAxis::tap_layer;
  s.grid = {"1", "9"};
  s.source = "mlp";
  s.images = 4;
  try {
    run_ablation(s, world().zoo, world().test);
    FAIL();
  } catch (const ValueError& e) {
    EXPECT_NE(std::string(e.what()).find("valid taps: 0,1,2,3"), std::string::npos) << e.what();
  }
  s.grid.clear();
  EXPECT_THROW(run_ablation(s, world().zoo, world().test), ValueError);
}

TEST(Ablation, SingleStepGridMatchesDirectAttacks) {
  AblationSpec s;
  s.axis = AblationAxis::steps_n;
  s.grid = {"1"};
  s.source = "conv";
  s.images = 10;
  s.first_image = 5;
  s.base.iterations = 3;
  s.base.seed = 4;
  const AblationResult r = run_ablation(s, world().zoo, world().test);
  ASSERT_EQ(r.rows.size(), 2u);

  AttackConfig c = s.base;
  c.steps = 1;
  c.tap = 1;
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& target = world().zoo.models[t];
    std::size_t success = 0, total = 0;
    for (std::size_t i = 5; i < 15; ++i) {
      const auto x = world().test.image<float>(i);
      const std::size_t label = world().test.labels[i];
      if (target.predict(x) != label) continue;
      ++total;
      AttackConfig ci = c;
      ci.seed = derive_seed(c.seed, i);
      success += target.predict(naa_attack(world().zoo.models[0], x, label, ci).x_adv) != label;
    }
    EXPECT_EQ(r.rows[t].success, success);
    EXPECT_EQ(r.rows[t].total, total);
  }
}

TEST(Ablation, GammaGridGivesOnePointPerValue) {
  AblationSpec s;
  s.axis = AblationAxis::gamma;
  s.grid = default_ablation_grid(AblationAxis::gamma, {});
  s.source = "mlp";
  s.images = 4;
  s.base.iterations = 2;
  s.base.steps = 2;
  const AblationResult r = run_ablation(s, world().zoo, world().test);
  EXPECT_EQ(r.rows.size(), 4u * 2u);
  const std::string csv = r.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "axis,value,target,success,total,asr");
  EXPECT_THROW(r.heatmap_csv(), ValueError);
}

TEST(Ablation, TransformPairsFillAFiveByFiveHeatMap) {
  AblationSpec s;
  s.axis = AblationAxis::transform_pair;
  s.grid = default_ablation_grid(AblationAxis::transform_pair, {});
  ASSERT_EQ(s.grid.size(), 25u);
  s.source = "conv";
  s.images = 3;
  s.base.iterations = 1;
  s.base.steps = 1;
  const std::string heat = run_ablation(s, world().zoo, world().test).heatmap_csv();
  std::vector<std::string> lines;
  std::istringstream in(heat);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "fp\\fn,linear,log,sqrt,square,exp");
  for (std::size_t i = 1; i < 6; ++i) EXPECT_EQ(std::count(lines[i].begin(), lines[i].end(), ','), 5);
  EXPECT_EQ(lines[1].find(",,"), std::string::npos);
}

TEST(Ablation, AxisNamesParse) {
  for (auto a : {AblationAxis::tap_layer, AblationAxis::steps_n, AblationAxis::gamma, AblationAxis::transform_pair}) {
    EXPECT_EQ(parse_ablation_axis(ablation_axis_name(a)), a);
  }
  EXPECT_FALSE(parse_ablation_axis("epsilon").has_value());
}
