#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "stochsens/model.hpp"
#include "stochsens/model_io.hpp"
#include "stochsens/models.hpp"

using namespace stochsens;

namespace {

ReactionNetwork dimerization(double c = 2.0) {
  return NetworkBuilder()
      .species("S", 4)
      .parameter("c", c)
      .sensitive("c")
      .reaction({{"S", 2}}, {}, "c")
      .build();
}

const char* kBirthDeathJson = R"({
  "species": ["S"],
  "x0": [0],
  "params": {"birth": 1.0, "theta": 0.1},
  "sensitive": "theta",
  "reactions": [
    {"reactants": {}, "products": {"S": 1}, "rate": "birth"},
    {"reactants": {"S": 1}, "products": {}, "rate": "theta"}
  ],
  "observable": {"coeffs": {"S": 1.0}, "offset": 0.0},
  "T": 5.0
})";

}  // namespace

TEST(Propensity, BirthDeathDegradation) {
  const auto bd = models::birth_death(0.1);
  const State x{3};
  EXPECT_DOUBLE_EQ(propensity(bd.network, 1, x), 0.3);
}

TEST(Propensity, MissingReactantGivesZero) {
  const auto bd = models::birth_death(0.1);
  EXPECT_EQ(propensity(bd.network, 1, State{0}), 0.0);
  const auto dim = dimerization();
  EXPECT_EQ(propensity(dim, 0, State{1}), 0.0);
}

TEST(Propensity, DimerizationCountsOrderedPairs) {
  const auto dim = dimerization(2.0);
  EXPECT_DOUBLE_EQ(propensity(dim, 0, State{4}), 24.0);
  // Brute force: ordered pairs of distinct molecules.
  int pairs = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) pairs += a != b;
  EXPECT_DOUBLE_EQ(propensity(dim, 0, State{4}), 2.0 * pairs);
}

TEST(Propensity, ThetaOverride) {
  const auto bd = models::birth_death(0.1);
  EXPECT_DOUBLE_EQ(propensity(bd.network, 1, State{3}, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(propensity(bd.network, 0, State{3}, 0.5), 1.0);  // birth
}

TEST(Propensity, Errors) {
  const auto bd = models::birth_death(0.1);
  EXPECT_THROW(propensity(bd.network, 2, State{1}), Error);
  EXPECT_THROW(propensity(bd.network, 0, State{-1}), Error);
  EXPECT_THROW(propensity_dtheta(bd.network, 5, State{1}), Error);
}

TEST(PropensityDtheta, Examples) {
  const auto bd = models::birth_death(0.1);
  EXPECT_DOUBLE_EQ(propensity_dtheta(bd.network, 1, State{3}), 3.0);
  EXPECT_EQ(propensity_dtheta(bd.network, 0, State{3}), 0.0);
  const auto pb = models::pure_birth(0.1);
  for (Count x : {0, 1, 7, 100})
    EXPECT_DOUBLE_EQ(propensity_dtheta(pb.network, 0, State{x}), 1.0);
}

TEST(PropensityDtheta, MatchesCentredDifference) {
  std::mt19937_64 gen(7);
  const ReactionNetwork net = NetworkBuilder()
                                  .species("A", 0)
                                  .species("B", 0)
                                  .parameter("k1", 0.7)
                                  .parameter("k2", 0.3)
                                  .sensitive("k2")
                                  .reaction({{"A", 1}, {"B", 2}}, {{"A", 2}}, "k2")
                                  .reaction({{"A", 3}}, {{"B", 1}}, "k2")
                                  .reaction({}, {{"A", 1}}, "k1")
                                  .build();
  std::uniform_int_distribution<Count> count(0, 30);
  for (int rep = 0; rep < 200; ++rep) {
    const State x{count(gen), count(gen)};
    for (std::size_t k = 0; k < net.num_reactions(); ++k) {
      const double theta = net.theta(), delta = 1e-6;
      const double fd = (propensity(net, k, x, theta + delta) -
                         propensity(net, k, x, theta - delta)) /
                        (2 * delta);
      const double exact = propensity_dtheta(net, k, x);
      EXPECT_NEAR(fd, exact, 1e-6 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST(TotalPropensity, Examples) {
  EXPECT_DOUBLE_EQ(total_propensity(models::birth_death(0.1).network, State{2}), 1.2);
  EXPECT_EQ(total_propensity(dimerization(), State{1}), 0.0);
  EXPECT_EQ(total_propensity(models::pure_birth(0.0).network, State{5}), 0.0);
}

TEST(Kinetics, AgreesWithCheckedFunctions) {
  const auto g = models::gene_expression(0.0116);
  const Kinetics kin(g.network);
  const State x{1, 3, 17};
  double total = 0;
  for (std::size_t k = 0; k < kin.size(); ++k) {
    EXPECT_DOUBLE_EQ(kin.propensity(k, x), propensity(g.network, k, x));
    EXPECT_DOUBLE_EQ(kin.dtheta(k, x), propensity_dtheta(g.network, k, x));
    total += kin.propensity(k, x);
  }
  EXPECT_DOUBLE_EQ(kin.total(x), total);
  EXPECT_DOUBLE_EQ(total_propensity(g.network, x), total);
}

TEST(Validate, GeneExpressionIsClean) {
  EXPECT_TRUE(validate(models::gene_expression().network).empty());
}

TEST(Validate, PureBirthIsClean) {
  EXPECT_TRUE(validate(models::pure_birth().network).empty());
}

TEST(Validate, AutocatalyticOrderTwoGrowthIsFlagged) {
  const ReactionNetwork net = NetworkBuilder()
                                  .species("S", 2)
                                  .parameter("c", 1.0)
                                  .sensitive("c")
                                  .reaction({{"S", 2}}, {{"S", 3}}, "c")
                                  .build();
  const auto v = validate(net);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].condition, 'D');
  EXPECT_EQ(v[0].reaction, 0u);
  EXPECT_FALSE(v[0].blocking());
}

TEST(Validate, InconsistentStoichiometryIsBlocking) {
  Reaction r;
  r.reactants = {{0, 1}};
  r.rate_param = "c";
  r.stoich = {-2};  // removes more than it consumes
  ParameterSet p;
  p.values["c"] = 1.0;
  p.sensitive = "c";
  const ReactionNetwork net({"S"}, {r}, p, State{3});
  const auto v = validate(net);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].condition, 'C');
  EXPECT_TRUE(v[0].blocking());
}

TEST(Network, ConstructionErrors) {
  EXPECT_THROW(NetworkBuilder().species("S").species("S").parameter("c", 1)
                   .sensitive("c").reaction({}, {{"S", 1}}, "c").build(),
               ModelError);
  EXPECT_THROW(NetworkBuilder().species("S").parameter("c", 1).sensitive("c").build(),
               ModelError);  // K = 0
  EXPECT_THROW(NetworkBuilder().species("S", -1).parameter("c", 1).sensitive("c")
                   .reaction({}, {{"S", 1}}, "c").build(),
               ModelError);
  EXPECT_THROW(NetworkBuilder().species("S").parameter("c", 1).sensitive("d")
                   .reaction({}, {{"S", 1}}, "c").build(),
               ModelError);
  EXPECT_THROW(NetworkBuilder().species("S").parameter("c", 1).sensitive("c")
                   .reaction({{"S", 4}}, {}, "c").build(),
               ModelError);  // order 4
  EXPECT_THROW(NetworkBuilder().species("S").parameter("c", -1).sensitive("c")
                   .reaction({}, {{"S", 1}}, "c").build(),
               ModelError);
}

TEST(Network, ThetaZeroAllowed) {
  const auto pb = models::pure_birth(0.0);
  EXPECT_EQ(pb.network.theta(), 0.0);
}

TEST(ModelIO, BirthDeathFile) {
  const ModelSpec spec = parse_model(kBirthDeathJson);
  EXPECT_EQ(spec.network.num_reactions(), 2u);
  EXPECT_EQ(spec.network.num_species(), 1u);
  EXPECT_EQ(spec.network.x0(), State{0});
  EXPECT_DOUBLE_EQ(spec.horizon, 5.0);
  EXPECT_DOUBLE_EQ(spec.network.theta(), 0.1);
}

TEST(ModelIO, DuplicateSpeciesIsReferenceError) {
  std::string text = kBirthDeathJson;
  text.replace(text.find(R"(["S"])"), 5, R"(["S", "S"])");
  text.replace(text.find("[0]"), 3, "[0, 0]");
  try {
    parse_model(text);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("species"), std::string::npos);
  }
}

TEST(ModelIO, ErrorsCarryContext) {
  auto expect_msg = [](const std::string& text, const std::string& needle) {
    try {
      parse_model(text);
      ADD_FAILURE() << "expected ModelError containing " << needle;
    } catch (const ModelError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  std::string unknown_species = kBirthDeathJson;
  const std::string from = R"("reactants": {"S": 1})";
  unknown_species.replace(unknown_species.find(from), from.size(),
                          R"("reactants": {"Q": 1})");
  expect_msg(unknown_species, "reactions[1]");
  std::string unknown_param = kBirthDeathJson;
  unknown_param.replace(unknown_param.find(R"("rate": "birth")"), 15,
                        R"("rate": "nope")");
  expect_msg(unknown_param, "reactions[0].rate");
  std::string negative = kBirthDeathJson;
  negative.replace(negative.find("[0]"), 3, "[-3]");
  expect_msg(negative, "x0");
  expect_msg("{\n  \"species\": [\n  oops\n}", "line 3");
}

TEST(ModelIO, GeneExpressionParameters) {
  const ModelSpec spec = load_model("models/gene-expression.json");
  const auto& p = spec.network.params();
  EXPECT_DOUBLE_EQ(p.value("k_R"), 0.6);
  EXPECT_DOUBLE_EQ(p.value("k_P"), 1.7329);
  EXPECT_DOUBLE_EQ(p.value("gamma_R"), 0.3466);
  EXPECT_EQ(spec.network.sensitive(), "gamma_P");
}

TEST(ModelIO, RoundTripIsByteIdentical) {
  for (const auto& name : models::builtin_names()) {
    const std::string once = serialize_model(*models::builtin(name));
    const std::string twice = serialize_model(parse_model(once));
    EXPECT_EQ(once, twice) << name;
  }
  const std::string a = serialize_model(parse_model(kBirthDeathJson));
  EXPECT_EQ(a, serialize_model(parse_model(a)));
}

TEST(ModelIO, ShippedFilesMatchBuiltins) {
  for (const auto& name : models::builtin_names()) {
    const std::string from_file = serialize_model(load_model("models/" + name + ".json"));
    EXPECT_EQ(from_file, serialize_model(*models::builtin(name))) << name;
  }
}
