#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "wrc/policy.hpp"
#include "wrc/policy_io.hpp"
#include "wrc/value.hpp"

using namespace wrc;

namespace {

// The dual-personality input-worker policy used throughout: source's
// sensitivity follows the current domain, sinks are fixed.
ClassificationPolicy worker_policy() {
    ClassificationPolicy p;
    p.declare_value_dep("source", "domain", {Value{0}});
    p.declare_static("domain", Level::Low);
    p.declare_static("workspace", Level::Low);
    p.declare_static("low_sink", Level::Low);
    p.declare_static("high_sink", Level::High);
    p.declare_static("suspended", Level::Low);
    p.declare_locks({"source_lock", "workspace_lock"});
    return p;
}

LockInterp worker_interp() {
    LockInterp li;
    li["source_lock"] = LockSets{{"source", "domain"}, {}};
    li["workspace_lock"] = LockSets{{}, {"workspace"}};
    return li;
}

} // namespace

TEST_CASE("wrapping arithmetic and lock truthiness") {
    CHECK(wrap_add(Value{INT64_MAX}, Value{1}) == Value{INT64_MIN});
    CHECK(wrap_mul(Value{INT64_MIN}, Value{-1}) == Value{INT64_MIN});
    CHECK(ev_lock(lock_true));
    CHECK_FALSE(ev_lock(lock_false));
    CHECK(ev_lock(Value{-3}));
    CHECK(apply_op(BinOp::Le, Value{2}, Value{2}) == Value{1});
    CHECK(apply_op(BinOp::And, Value{2}, Value{0}) == Value{0});
    CHECK(apply_op(BinOp::Or, Value{0}, Value{-1}) == Value{1});
}

TEST_CASE("classification follows the control variable") {
    auto p = worker_policy();
    Mem m;
    m.set_var("domain", Value{0});
    CHECK(p.dma_var(m, "source") == Level::Low);
    m.set_var("domain", Value{1});
    CHECK(p.dma_var(m, "source") == Level::High);

    CHECK(p.dma(m, lock_var("anything")) == Level::Low);
    CHECK(p.dma_var(m, "high_sink") == Level::High);
    CHECK_THROWS_AS(p.dma_var(m, "undeclared"), UnknownVariable);

    CHECK(p.cset() == std::set<std::string>{"domain"});
    CHECK(p.cvars("source") == std::set<std::string>{"domain"});
    CHECK(p.cvars("domain").empty());
}

TEST_CASE("low equivalence of memories") {
    auto p = worker_policy();
    Mem m1, m2;
    CHECK(low_eq(p, m1, m1));

    m1.set_var("domain", Value{1});
    m2.set_var("domain", Value{1});
    m1.set_var("source", Value{5});
    m2.set_var("source", Value{9});
    CHECK(low_eq(p, m1, m2));  // source is High while domain != 0

    m1.set_var("domain", Value{0});
    m2.set_var("domain", Value{0});
    CHECK_FALSE(low_eq(p, m1, m2));  // now Low and 5 != 9
}

TEST_CASE("low equivalence modulo modes") {
    auto p = worker_policy();
    ModeState mds;
    Mem m1, m2;
    CHECK(low_eq_mod_modes(p, mds, m1, m2));

    // A non-readable Low variable is exempt from comparison.
    m1.set_var("workspace", Value{3});
    m2.set_var("workspace", Value{7});
    CHECK_FALSE(low_eq_mod_modes(p, mds, m1, m2));
    mds.asm_no_rw.insert("workspace");
    CHECK(low_eq_mod_modes(p, mds, m1, m2));

    // Control variables are always compared, readable or not.
    Mem c1, c2;
    c1.set_var("domain", Value{0});
    c2.set_var("domain", Value{1});
    ModeState hide;
    hide.asm_no_rw.insert("domain");
    CHECK_FALSE(low_eq_mod_modes(p, hide, c1, c2));
}

TEST_CASE("readability and writability") {
    ModeState mds;
    CHECK(readable(mds, "x"));
    CHECK(writable(mds, "x"));

    mds.asm_no_w.insert("x");
    CHECK(readable(mds, "x"));
    CHECK_FALSE(writable(mds, "x"));

    ModeState mds2;
    mds2.asm_no_rw.insert("x");
    CHECK_FALSE(readable(mds2, "x"));
    CHECK_FALSE(writable(mds2, "x"));
}

TEST_CASE("lock discipline restrictions") {
    auto p = worker_policy();

    SECTION("the worker discipline is clean") {
        CHECK(check_lock_discipline(worker_interp(), p).empty());
    }
    SECTION("vacuous locks are rejected") {
        auto li = worker_interp();
        li["idle_lock"] = LockSets{};
        auto v = check_lock_discipline(li, p);
        REQUIRE(v.size() == 1);
        CHECK(v[0].restriction == 6);
    }
    SECTION("double management is rejected") {
        auto li = worker_interp();
        li["second_lock"] = LockSets{{"workspace"}, {}};
        bool found = false;
        for (const auto& v : check_lock_discipline(li, p))
            if (v.restriction == 5) found = true;
        CHECK(found);
    }
    SECTION("a lock must cover control variables alongside their dependents") {
        LockInterp li;
        li["partial_lock"] = LockSets{{"source"}, {}};  // omits domain
        bool found = false;
        for (const auto& v : check_lock_discipline(li, p))
            if (v.restriction == 4) found = true;
        CHECK(found);
    }
    SECTION("overlapping sets within one lock are rejected") {
        LockInterp li;
        li["odd_lock"] = LockSets{{"workspace"}, {"workspace"}};
        bool found = false;
        for (const auto& v : check_lock_discipline(li, p))
            if (v.restriction == 7) found = true;
        CHECK(found);
    }
    SECTION("locks governing locks are rejected") {
        auto li = worker_interp();
        li["meta_lock"] = LockSets{{"source_lock"}, {}};
        bool found = false;
        for (const auto& v : check_lock_discipline(li, p))
            if (v.restriction == 1) found = true;
        CHECK(found);
    }
}

TEST_CASE("plain low equivalence implies the modulo-modes variant with empty modes") {
    // Enumerated over two variables with values in {0,1,2}.
    ClassificationPolicy p;
    p.declare_value_dep("x", "c", {Value{0}});
    p.declare_static("c", Level::Low);
    ModeState empty;
    for (int x1 = 0; x1 < 3; ++x1)
        for (int c1 = 0; c1 < 3; ++c1)
            for (int x2 = 0; x2 < 3; ++x2)
                for (int c2 = 0; c2 < 3; ++c2) {
                    Mem m1, m2;
                    m1.set_var("x", Value{x1});
                    m1.set_var("c", Value{c1});
                    m2.set_var("x", Value{x2});
                    m2.set_var("c", Value{c2});
                    if (low_eq(p, m1, m2)) CHECK(low_eq_mod_modes(p, empty, m1, m2));
                }
}

TEST_CASE("equivalences are symmetric when control variables agree") {
    ClassificationPolicy p;
    p.declare_value_dep("x", "c", {Value{0}});
    p.declare_static("c", Level::Low);
    ModeState empty;
    for (int x1 = 0; x1 < 3; ++x1)
        for (int x2 = 0; x2 < 3; ++x2)
            for (int c = 0; c < 3; ++c) {
                Mem m1, m2;
                m1.set_var("x", Value{x1});
                m1.set_var("c", Value{c});
                m2.set_var("x", Value{x2});
                m2.set_var("c", Value{c});
                CHECK(low_eq(p, m1, m2) == low_eq(p, m2, m1));
                CHECK(low_eq_mod_modes(p, empty, m1, m2) ==
                      low_eq_mod_modes(p, empty, m2, m1));
            }
}

TEST_CASE("classification depends only on control variables") {
    auto p = worker_policy();
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> val(0, 5);
    for (int trial = 0; trial < 200; ++trial) {
        Mem m;
        for (const auto& [v, _] : p.vars()) m.set_var(v, Value{val(rng)});
        // Mutating any non-control variable never moves any classification.
        for (const auto& [v, _] : p.vars()) {
            if (p.cset().count(v)) continue;
            Mem m2 = m;
            m2.set_var(v, Value{val(rng) + 10});
            for (const auto& [u, __] : p.vars())
                CHECK(p.dma_var(m, u) == p.dma_var(m2, u));
        }
    }
}

TEST_CASE("policy files parse, validate, and enumerate") {
    nlohmann::json j = {
        {"variables",
         {{"source", {{"class", "valuedep"}, {"control", "domain"}, {"low_values", {0}}}},
          {"domain", {{"class", "low"}}},
          {"high_sink", {{"class", "high"}}}}},
        {"locks", {{"source_lock", {{"no_w", {"source", "domain"}}, {"no_rw", nlohmann::json::array()}}}}},
        {"init", {{"enumerate", {{"source", {0, 1}}, {"domain", {0, 1}}}},
                  {"fixed", {{"high_sink", 2}}}}}};
    PolicyFile pf = policy_from_json(j);
    CHECK(pf.policy.is_declared("source"));
    CHECK(pf.policy.is_lock("source_lock"));
    CHECK(pf.interp.at("source_lock").no_w.count("domain") == 1);

    auto mems = enumerate_init_mems(pf.init);
    REQUIRE(mems.size() == 4);
    for (const auto& m : mems) CHECK(m.get_var("high_sink") == Value{2});

    // Control variables must be statically Low.
    nlohmann::json bad = j;
    bad["variables"]["domain"]["class"] = "high";
    CHECK_THROWS_AS(policy_from_json(bad), PolicyError);
}
