// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "iorm/hierarchy.hpp"

using namespace iorm;

namespace {

NodeSpec cdb(std::string id, std::int64_t shares, std::optional<double> limit = std::nullopt, bool dflt = false) {
  return {std::move(id), "", Level::cdb(), shares, limit, dflt};
}
NodeSpec pdb(std::string id, std::string parent, std::int64_t shares, std::optional<double> limit = std::nullopt) {
  return {std::move(id), std::move(parent), Level::pdb(), shares, limit, false};
}
NodeSpec wl(std::string id, std::string parent, std::int64_t shares, std::optional<double> limit = std::nullopt) {
  return {std::move(id), std::move(parent), Level::workload(), shares, limit, false};
}

PlanSpec worked_example() {
  return {{cdb("CDB-Prod", 60), cdb("CDB-Other", 40, std::nullopt, true), pdb("PDB-Sales", "CDB-Prod", 25),
           pdb("PDB-HR", "CDB-Prod", 75), wl("BATCH", "PDB-Sales", 20), wl("OLTP", "PDB-Sales", 80)},
          Objective::Auto,
          1};
}

Errc code_of(const PlanSpec& spec) {
  try {
    build_plan(spec);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected build_plan to throw";
  return Errc::IoError;
}

}  // namespace

TEST(Hierarchy, WorkedExampleIsExactlyThreePercent) {
  auto plan = build_plan(worked_example());
  EXPECT_EQ(effective_allocation(plan, "BATCH").share_fraction, 0.03);
  EXPECT_EQ(effective_allocation(plan, "PDB-Sales").share_fraction, 0.15);
  EXPECT_EQ(effective_allocation(plan, "CDB-Prod").share_fraction, 0.6);
}

TEST(Hierarchy, ImplicitDefaultsFillToLeafLevel) {
  auto plan = build_plan(worked_example());
  EXPECT_EQ(plan.leaf_level(), Level::workload().rank());
  ASSERT_TRUE(plan.find("PDB-HR/default"));
  ASSERT_TRUE(plan.find("CDB-Other/default/default"));
  EXPECT_TRUE(plan.node(*plan.find("PDB-HR/default")).implicit);
  EXPECT_EQ(plan.node(plan.default_leaf()).id, "CDB-Other/default/default");
  for (auto l : plan.leaves()) EXPECT_EQ(plan.node(l).level.rank(), plan.leaf_level());
}

TEST(Hierarchy, ValidationErrors) {
  auto spec = worked_example();
  spec.nodes.push_back(wl("BATCH", "PDB-HR", 1));
  EXPECT_EQ(code_of(spec), Errc::MalformedHierarchy);

  spec = worked_example();
  spec.nodes[4].parent = "CDB-Prod";  // workload directly under a CDB
  EXPECT_EQ(code_of(spec), Errc::MalformedHierarchy);

  spec = worked_example();
  spec.nodes[2].parent = "nope";
  EXPECT_EQ(code_of(spec), Errc::MalformedHierarchy);

  spec = worked_example();
  spec.nodes[1].untagged_default = false;
  EXPECT_EQ(code_of(spec), Errc::MissingDefault);

  spec = worked_example();
  spec.nodes[0].untagged_default = true;
  EXPECT_EQ(code_of(spec), Errc::InvalidDirective);

  spec = worked_example();
  spec.nodes[0].shares = 0;
  EXPECT_EQ(code_of(spec), Errc::InvalidDirective);

  spec = worked_example();
  spec.nodes[0].limit = 1.5;
  EXPECT_EQ(code_of(spec), Errc::InvalidDirective);

  spec = worked_example();
  spec.nodes[0].limit = 0.0;
  EXPECT_EQ(code_of(spec), Errc::InvalidDirective);
}

TEST(Hierarchy, CycleIsRejected) {
  PlanSpec spec{{cdb("A", 1, std::nullopt, true), pdb("P", "Q", 1), pdb("Q", "P", 1)}, Objective::Auto, 1};
  EXPECT_EQ(code_of(spec), Errc::MalformedHierarchy);
}

TEST(Hierarchy, UnknownNodeLookup) {
  auto plan = build_plan(worked_example());
  try {
    effective_allocation(plan, "missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownNode);
  }
}

TEST(Hierarchy, LimitCascadeIsMultiplicative) {
  PlanSpec spec{{cdb("A", 1, 0.5), pdb("P", "A", 1, 0.2), wl("W", "P", 1, 0.5), cdb("B", 1, std::nullopt, true)},
                Objective::Auto,
                1};
  auto plan = build_plan(spec);
  auto a = effective_allocation(plan, "W");
  EXPECT_TRUE(a.limited);
  EXPECT_DOUBLE_EQ(a.effective_limit, 0.05);
  EXPECT_FALSE(effective_allocation(plan, "B").limited);
  EXPECT_EQ(effective_allocation(plan, "B").effective_limit, 1.0);
}

TEST(Hierarchy, DeeperLevelsAreAccepted) {
  PlanSpec spec{{cdb("A", 1), pdb("P", "A", 1), wl("W", "P", 1), {"X", "W", Level{4}, 3, std::nullopt, false},
                 cdb("D", 1, std::nullopt, true)},
                Objective::Auto,
                1};
  auto plan = build_plan(spec);
  EXPECT_EQ(plan.leaf_level(), 4);
  EXPECT_TRUE(plan.find("D/default/default/default"));
  EXPECT_EQ(plan.node(plan.default_leaf()).id, "D/default/default/default");
  EXPECT_EQ(Level::parse("level4")->rank(), 4);
  EXPECT_EQ(Level::parse("pdb")->rank(), 2);
}

TEST(Hierarchy, PlanSwapRequiresNewerVersion) {
  auto v1 = std::make_shared<const ResourcePlan>(build_plan(worked_example()));
  PlanHandle h(v1);
  auto spec = worked_example();
  try {
    swap_plan(h, std::make_shared<const ResourcePlan>(build_plan(spec)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StalePlan);
  }
  spec.version = 2;
  swap_plan(h, std::make_shared<const ResourcePlan>(build_plan(spec)));
  EXPECT_EQ(h.current()->version(), 1u);  // visible only at the next boundary
  EXPECT_TRUE(h.apply_pending());
  EXPECT_EQ(h.current()->version(), 2u);
  EXPECT_FALSE(h.apply_pending());
}

TEST(Hierarchy, SpecRoundTrip) {
  auto plan = build_plan(worked_example());
  auto again = build_plan(plan.to_spec());
  ASSERT_EQ(plan.size(), again.size());
  for (NodeIndex i = 0; i < plan.size(); ++i) {
    EXPECT_EQ(plan.node(i).id, again.node(i).id);
    EXPECT_EQ(plan.node(i).shares, again.node(i).shares);
  }
}

// Random trees: leaf share fractions sum to 1, a node's fraction equals the
// sum over its children, and tightening any limit never loosens a leaf.
TEST(HierarchyProperty, RandomTrees) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    PlanSpec spec;
    std::uniform_int_distribution<int> fan(1, 4), shares(1, 100);
    std::bernoulli_distribution lim(0.3);
    std::uniform_real_distribution<double> lval(0.01, 1.0);
    int ncdb = fan(rng);
    for (int c = 0; c < ncdb; ++c) {
      std::string cid = "C" + std::to_string(c);
      spec.nodes.push_back(cdb(cid, shares(rng), lim(rng) ? std::optional(lval(rng)) : std::nullopt));
      int npdb = fan(rng) - 1;
      for (int p = 0; p < npdb; ++p) {
        std::string pid = cid + "P" + std::to_string(p);
        spec.nodes.push_back(pdb(pid, cid, shares(rng), lim(rng) ? std::optional(lval(rng)) : std::nullopt));
        int nw = fan(rng) - 1;
        for (int w = 0; w < nw; ++w)
          spec.nodes.push_back(wl(pid + "W" + std::to_string(w), pid, shares(rng),
                                  lim(rng) ? std::optional(lval(rng)) : std::nullopt));
      }
    }
    spec.nodes.push_back(cdb("DFLT", shares(rng), std::nullopt, true));
    auto plan = build_plan(spec);
    double sum = 0;
    for (auto l : plan.leaves()) sum += effective_allocation(plan, plan.node(l).id).share_fraction;
    EXPECT_NEAR(sum, 1.0, 1e-12);

    for (NodeIndex i = 1; i < plan.size(); ++i) {
      if (plan.is_leaf(i)) continue;
      double kids = 0;
      for (auto c : plan.node(i).children) kids += effective_allocation(plan, plan.node(c).id).share_fraction;
      EXPECT_NEAR(kids, effective_allocation(plan, plan.node(i).id).share_fraction, 1e-12);
    }

    // Top-down product equals the bottom-up minimum of cascaded budgets.
    for (auto l : plan.leaves()) {
      double cascade = 1.0, min_budget = 1.0;
      for (auto a : plan.path_to(l)) {
        if (plan.node(a).limit) cascade *= *plan.node(a).limit;
        min_budget = std::min(min_budget, cascade);
      }
      EXPECT_DOUBLE_EQ(effective_allocation(plan, plan.node(l).id).effective_limit, min_budget);
    }

    // Tighten one random explicit limit; no leaf's limit may grow.
    auto tighter = spec;
    std::uniform_int_distribution<std::size_t> pick(0, tighter.nodes.size() - 1);
    auto& n = tighter.nodes[pick(rng)];
    n.limit = n.limit ? *n.limit * 0.5 : 0.5;
    auto plan2 = build_plan(tighter);
    for (auto l : plan.leaves()) {
      const auto& id = plan.node(l).id;
      EXPECT_LE(effective_allocation(plan2, id).effective_limit, effective_allocation(plan, id).effective_limit);
    }
  }
}
