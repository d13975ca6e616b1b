#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "wrc/compile.hpp"
#include "wrc/parse.hpp"
#include "wrc/risc_text.hpp"

using namespace wrc;
using namespace wrctest;

namespace {

// Policy with three always-stable candidates and no value dependencies.
ClassificationPolicy vw_policy() {
    ClassificationPolicy p;
    for (const char* v : {"v", "w", "y", "z"}) p.declare_static(v, Level::Low);
    p.declare_locks({});
    return p;
}

AsmRec stable_on(std::initializer_list<std::string> vars) {
    AsmRec s;
    for (const auto& v : vars) s.no_w.insert(v);
    return s;
}

RiscConf run_output(const CompileOutput& out, Mem mem, const LockInterp& interp,
                    const ModeState& mds0 = {}, int num_regs = default_register_count,
                    int max_steps = 10000) {
    auto prog = std::make_shared<RiscProgram>(finalize(out));
    RiscConf c = make_risc_conf(prog, num_regs, mds0, std::move(mem));
    for (int i = 0; i < max_steps && !stops(c); ++i) c = step_risc(c, interp).first;
    REQUIRE(stops(c));
    return c;
}

} // namespace

TEST_CASE("register allocation") {
    RegRec phi;
    phi[2] = e_var("v");

    SECTION("cached lookup finds the register already holding the variable") {
        CHECK(reg_alloc_cached(phi, {}, "v", 8) == 2);
        CHECK(reg_alloc_cached(phi, {2}, "v", 8) == std::nullopt);  // pinned
        CHECK(reg_alloc_cached(phi, {}, "w", 8) == std::nullopt);
    }
    SECTION("fresh allocation prefers unmapped registers, lowest index first") {
        CHECK(reg_alloc(RegRec{}, {0}, 8) == 1);
        CHECK(reg_alloc(phi, {}, 8) == 0);
        RegRec full;
        for (Reg r = 0; r < 4; ++r) full[r] = e_var("v");
        CHECK(reg_alloc(full, {0}, 4) == 1);  // evicts the cache entry
    }
    SECTION("allocation may fail when everything is pinned") {
        CHECK(reg_alloc(RegRec{}, {0, 1}, 2) == std::nullopt);
    }
}

TEST_CASE("variable stability") {
    auto p = worker_policy();
    CHECK_FALSE(var_stable(AsmRec{}, p, "source"));
    CHECK(var_stable(stable_on({"source", "domain"}), p, "source"));
    CHECK_FALSE(var_stable(stable_on({"source"}), p, "source"));  // control var uncovered
    CHECK(var_stable(stable_on({"workspace"}), p, "workspace"));
}

TEST_CASE("expression compilation") {
    auto p = vw_policy();

    SECTION("simple sum emits loads then the operation") {
        CompRec rec{RegRec{}, stable_on({"y", "z"})};
        ExprPtr e = parse_expr_text("y + z");
        auto er = compile_expr(rec, {}, std::nullopt, e);
        REQUIRE_FALSE(er.failed);
        REQUIRE(er.code.size() == 3);
        CHECK(instr_str(er.code[0].instr) == "Load r0 y");
        CHECK(instr_str(er.code[1].instr) == "Load r1 z");
        CHECK(instr_str(er.code[2].instr) == "Op + r0 r1");
        CHECK(er.result == 0);
        REQUIRE(er.rec.regrec.count(0));
        REQUIRE(er.rec.regrec.count(1));
        CHECK(expr_equal(er.rec.regrec[0], e));
        CHECK(expr_equal(er.rec.regrec[1], e_var("z")));
    }
    SECTION("live subexpression registers are never reallocated") {
        CompRec rec{RegRec{}, stable_on({"v"})};
        ExprPtr e = parse_expr_text("v + (v + 1)");
        auto er = compile_expr(rec, {}, std::nullopt, e);
        REQUIRE_FALSE(er.failed);
        for (int vv = 0; vv < 3; ++vv) {
            Mem m;
            m.set_var("v", Value{vv});
            CompileOutput wrap;
            wrap.annotated = er.code;
            wrap.final_rec = er.rec;
            RiscConf end = run_output(wrap, m, {});
            CHECK(end.regs[static_cast<size_t>(er.result)] == oracle_eval(*e, m));
            CHECK(end.regs[static_cast<size_t>(er.result)] == Value{2 * vv + 1});
        }
    }
    SECTION("a cached variable compiles to no code") {
        CompRec rec{RegRec{{2, e_var("v")}}, stable_on({"v"})};
        auto er = compile_expr(rec, {}, Label{9}, e_var("v"));
        CHECK(er.code.empty());
        CHECK(er.result == 2);
        CHECK(comprec_equal(er.rec, rec));
    }
    SECTION("register exhaustion fails the compilation") {
        CompRec rec{RegRec{}, stable_on({"v", "w", "y", "z"})};
        auto er = compile_expr(rec, {}, std::nullopt, parse_expr_text("(v + w) + (y + z)"), 2);
        CHECK(er.failed);
    }
    SECTION("compiled code matches the oracle on random expressions") {
        std::mt19937_64 rng(17);
        std::vector<std::string> vars = {"v", "w", "y"};
        CompRec rec{RegRec{}, stable_on({"v", "w", "y"})};
        for (int trial = 0; trial < 300; ++trial) {
            ExprPtr e = random_expr(rng, vars, 4);
            auto er = compile_expr(rec, {}, std::nullopt, e);
            REQUIRE_FALSE(er.failed);
            REQUIRE(er.rec.regrec.count(er.result));
            CHECK(expr_equal(er.rec.regrec[er.result], e));  // record names the expression
            Mem m;
            for (const auto& v : vars)
                m.set_var(v, Value{std::uniform_int_distribution<int>(0, 2)(rng)});
            CompileOutput wrap;
            wrap.annotated = er.code;
            wrap.final_rec = er.rec;
            RiscConf end = run_output(wrap, m, {});
            CHECK(end.regs[static_cast<size_t>(er.result)] == oracle_eval(*e, m));
        }
    }
}

TEST_CASE("stability checks") {
    auto p = worker_policy();
    auto li = worker_interp();

    SECTION("reading an unstable variable is rejected") {
        CHECK_FALSE(stability_checks(parse("workspace := source"), init_comprec(), li, p));
        auto st = stability_checks_detail(parse("low_sink := suspended"), init_comprec(), li, p);
        CHECK_FALSE(st.ok);
        CHECK(st.reason.find("unstable") != std::string::npos);
    }
    SECTION("a lock covering the expression makes it acceptable") {
        CHECK(stability_checks(parse("acquire(source_lock); low_sink := source + domain;"
                                     " release(source_lock)"),
                               init_comprec(), li, p));
    }
    SECTION("writes to governed variables require the lock") {
        CHECK_FALSE(stability_checks(parse("domain := 1"), init_comprec(), li, p));
        CHECK(stability_checks(parse("acquire(source_lock); domain := 1; release(source_lock)"),
                               init_comprec(), li, p));
        // Ungoverned unstable targets may be written freely.
        CHECK(stability_checks(parse("low_sink := 1"), init_comprec(), li, p));
    }
    SECTION("branches must agree on the locks they end with") {
        auto st = stability_checks_detail(
            parse("acquire(source_lock);"
                  "if domain == 0 then release(source_lock) else skip fi"),
            init_comprec(), li, p);
        CHECK_FALSE(st.ok);
        CHECK(st.reason.find("different lock assumptions") != std::string::npos);
    }
    SECTION("loop bodies must restore the entry assumptions") {
        auto st = stability_checks_detail(
            parse("acquire(source_lock);"
                  "while domain == 0 do release(source_lock) od"),
            init_comprec(), li, p);
        CHECK_FALSE(st.ok);
        CHECK(st.reason.find("restore") != std::string::npos);
    }
}

TEST_CASE("command compilation shapes") {
    auto p = vw_policy();
    LockInterp li;

    SECTION("skip is a single annotated Nop") {
        auto out = compile_cmd(init_comprec(), std::nullopt, 0, c_skip(), li, p);
        REQUIRE_FALSE(out.failed);
        REQUIRE(out.annotated.size() == 1);
        CHECK(instr_str(out.annotated[0].instr) == "Nop");
        CHECK_FALSE(out.annotated[0].label.has_value());
        CHECK_FALSE(out.exit_label.has_value());
        CHECK(out.next_label == 0);
        CHECK(comprec_equal(out.final_rec, init_comprec()));
    }
    SECTION("assignment to an unstable governed variable fails") {
        auto wp = worker_policy();
        auto wli = worker_interp();
        auto out = compile_cmd(init_comprec(), std::nullopt, 0, parse("workspace := 1"), wli, wp);
        CHECK(out.failed);
    }
    SECTION("assignment flushes stale cache entries and records the store") {
        CompRec rec{RegRec{}, stable_on({"v", "w"})};
        auto out = compile_cmd(rec, std::nullopt, 0, parse("v := v + w"), li, p);
        REQUIRE_FALSE(out.failed);
        // v's old cache lines are gone; the result register holds v.
        bool found = false;
        for (const auto& [r, e] : out.final_rec.regrec) {
            if (expr_equal(e, e_var("v"))) found = true;
            CHECK_FALSE((mentions_var(*e, "v") && !expr_equal(e, e_var("v"))));
        }
        CHECK(found);
    }
    SECTION("the conditional reproduces the six-segment pattern") {
        CompRec rec{RegRec{}, stable_on({"v"})};
        auto out = compile_cmd(rec, std::nullopt, 0,
                               parse("if v != 0 then skip else skip fi"), li, p);
        REQUIRE_FALSE(out.failed);
        std::vector<std::string> got;
        for (const auto& ai : out.annotated) got.push_back(instr_str(ai.instr));
        std::vector<std::string> want = {"Load r0 v", "MoveK r1 0", "Op != r0 r1",
                                         "Jz L0 r0",  "Nop",        "Jmp L1",
                                         "Nop",       "Nop"};
        CHECK(got == want);
        // The branch label sits on the first instruction of the else branch.
        REQUIRE(out.annotated[6].label.has_value());
        CHECK(*out.annotated[6].label == 0);
        CHECK(out.exit_label == Label{1});
        CHECK(out.next_label == 2);

        RiscProgram fin = finalize(out);
        CHECK(fin.resolve(1) == fin.size());  // exit label one past the end
        CHECK(fin.resolve(0) == 6);
    }
    SECTION("branch records meet: only agreeing cache entries survive") {
        CompRec rec{RegRec{}, stable_on({"v", "w", "z"})};
        auto out = compile_cmd(rec, std::nullopt, 0,
                               parse("if v != 0 then w := 1 else z := 1 fi"), li, p);
        REQUIRE_FALSE(out.failed);
        // Both branches store through the same register but cache different
        // variables behind it, so that entry dies in the meet; the condition
        // registers are untouched by either branch and survive.
        CHECK(out.final_rec.regrec.count(0) == 1);
        CHECK(out.final_rec.regrec.count(1) == 1);
        CHECK(out.final_rec.regrec.count(2) == 0);
        for (const auto& [r, e] : out.final_rec.regrec) {
            CHECK_FALSE(mentions_var(*e, "w"));
            CHECK_FALSE(mentions_var(*e, "z"));
        }
    }
    SECTION("loops flush the cache and jump back to the head") {
        CompRec rec{RegRec{{3, e_var("w")}}, stable_on({"v", "w"})};
        auto out = compile_cmd(rec, std::nullopt, 0, parse("while 0 < v do v := v - 1 od"), li, p);
        REQUIRE_FALSE(out.failed);
        // Condition is compiled against an empty cache: loads come first.
        CHECK(instr_str(out.annotated[0].instr) == "MoveK r0 0");
        CHECK(out.annotated[0].rec.regrec.empty());
        REQUIRE(out.annotated[0].label.has_value());
        Label head = *out.annotated[0].label;
        CHECK(instr_str(out.annotated.back().instr) == "Jmp " + label_str(head));
        CHECK(out.final_rec.regrec.empty());
        CHECK(out.exit_label.has_value());

        Mem m;
        m.set_var("v", Value{3});
        RiscConf end = run_output(out, m, li);
        CHECK(end.mem.get_var("v") == Value{0});
    }
    SECTION("sequencing threads exit labels into the next fragment") {
        CompRec rec{RegRec{}, stable_on({"v", "w"})};
        auto out = compile_cmd(rec, std::nullopt, 0,
                               parse("if v != 0 then skip else skip fi; w := 1"), li, p);
        REQUIRE_FALSE(out.failed);
        RiscProgram fin = finalize(out);
        // The conditional's exit label lands on the first instruction of the
        // following assignment block.
        CHECK(fin.resolve(1) == 8);
        CHECK_FALSE(out.exit_label.has_value());  // assignment has no dangling exit
    }
    SECTION("a loop binds an incoming label as its head") {
        CompRec rec{RegRec{}, stable_on({"v", "w"})};
        auto out = compile_cmd(rec, std::nullopt, 0,
                               parse("if v != 0 then skip else skip fi;"
                                     "while 0 < w do w := w - 1 od"),
                               li, p);
        REQUIRE_FALSE(out.failed);
        RiscProgram fin = finalize(out);  // would throw if the if-exit stayed unbound
        Mem m;
        m.set_var("w", Value{2});
        RiscConf end = run_output(out, m, li);
        CHECK(end.mem.get_var("w") == Value{0});
    }
    SECTION("lock release flushes entries over variables it makes unstable") {
        auto wp = worker_policy();
        auto wli = worker_interp();
        auto out = compile_cmd(init_comprec(), std::nullopt, 0,
                               parse("acquire(source_lock); low_sink := source;"
                                     "release(source_lock)"),
                               wli, wp);
        REQUIRE_FALSE(out.failed);
        const auto& last = out.annotated.back();
        CHECK(instr_str(last.instr) == "LockRel source_lock");
        bool mentions_source = false;
        for (const auto& [r, e] : last.rec.regrec)
            if (mentions_var(*e, "source")) mentions_source = true;
        CHECK(mentions_source);  // still cached while the lock is held
        for (const auto& [r, e] : out.final_rec.regrec) {
            CHECK_FALSE(mentions_var(*e, "source"));
            CHECK_FALSE(mentions_var(*e, "domain"));
        }
        CHECK(out.final_rec.asmrec == AsmRec{});
    }
    SECTION("whole-program validation catches undeclared names") {
        CHECK_THROWS_AS(compile_program(parse("q := 1"), li, p), UnknownVariable);
        CHECK_THROWS_AS(compile_program(parse("acquire(nolock)"), li, p), UnknownLock);
    }
}

TEST_CASE("successful compilations keep every record stable") {
    std::mt19937_64 rng(21);
    auto p = gen_policy();
    auto li = gen_interp();
    for (int trial = 0; trial < 120; ++trial) {
        auto out = compile_program(random_accepted_cmd(rng, 4), li, p);
        REQUIRE_FALSE(out.failed);
        for (const auto& ai : out.annotated) CHECK(regrec_stable(ai.rec, p));
        CHECK(regrec_stable(out.final_rec, p));
    }
}

TEST_CASE("label discipline") {
    std::mt19937_64 rng(22);
    auto p = gen_policy();
    auto li = gen_interp();

    SECTION("allocated labels are fresh and unique") {
        for (int trial = 0; trial < 80; ++trial) {
            Label nl0 = std::uniform_int_distribution<Label>(0, 50)(rng);
            auto out = compile_cmd(init_comprec(), std::nullopt, nl0, random_accepted_cmd(rng, 4),
                                   li, p);
            REQUIRE_FALSE(out.failed);
            std::set<Label> seen;
            for (const auto& ai : out.annotated) {
                if (!ai.label) continue;
                CHECK(*ai.label >= nl0);
                CHECK(*ai.label < out.next_label);
                CHECK(seen.insert(*ai.label).second);
            }
            if (out.exit_label) {
                CHECK(*out.exit_label >= nl0);
                CHECK(*out.exit_label < out.next_label);
            }
        }
    }
    SECTION("consecutively compiled fragments are joinable") {
        for (int trial = 0; trial < 120; ++trial) {
            auto o1 = compile_cmd(init_comprec(), std::nullopt, 0, random_accepted_cmd(rng, 3),
                                  li, p);
            REQUIRE_FALSE(o1.failed);
            auto o2 = compile_cmd(o1.final_rec, o1.exit_label, o1.next_label,
                                  random_accepted_cmd(rng, 3), li, p);
            REQUIRE_FALSE(o2.failed);
            CHECK(joinable(o1.annotated, o2.annotated));

            CompileOutput joined;
            joined.annotated = o1.annotated;
            joined.annotated.insert(joined.annotated.end(), o2.annotated.begin(),
                                    o2.annotated.end());
            joined.exit_label = o2.exit_label;
            joined.next_label = o2.next_label;
            CHECK_NOTHROW(finalize(joined));
        }
    }
    SECTION("joinable examples") {
        auto mk = [](std::optional<Label> lab, Instr in) {
            return AnnotatedInstr{lab, std::move(in), CompRec{}};
        };
        std::vector<AnnotatedInstr> p1 = {mk(std::nullopt, Instr{JmpInstr{5}})};
        std::vector<AnnotatedInstr> p2 = {mk(Label{5}, Instr{NopInstr{}})};
        CHECK(joinable(p1, p2));
        std::vector<AnnotatedInstr> p3 = {mk(Label{3}, Instr{NopInstr{}})};
        std::vector<AnnotatedInstr> p4 = {mk(std::nullopt, Instr{JmpInstr{3}})};
        CHECK_FALSE(joinable(p3, p4));  // backward jump into the first program
        std::vector<AnnotatedInstr> p5 = {mk(std::nullopt, Instr{NopInstr{}})};
        CHECK(joinable(p5, p5));
    }
    SECTION("finalize reports duplicate and unbound labels") {
        CompileOutput dup;
        dup.annotated.push_back({Label{1}, Instr{NopInstr{}}, CompRec{}});
        dup.annotated.push_back({Label{1}, Instr{NopInstr{}}, CompRec{}});
        CHECK_THROWS_AS(finalize(dup), DuplicateLabel);

        CompileOutput unbound;
        unbound.annotated.push_back({std::nullopt, Instr{JmpInstr{9}}, CompRec{}});
        CHECK_THROWS_AS(finalize(unbound), UnboundLabel);
    }
}

TEST_CASE("compiled programs compute what the source computes") {
    std::mt19937_64 rng(23);
    auto p = gen_policy();
    auto li = gen_interp();
    for (int trial = 0; trial < 60; ++trial) {
        CmdPtr c = random_accepted_cmd(rng, 3);
        auto out = compile_program(c, li, p);
        REQUIRE_FALSE(out.failed);

        Mem m0;
        for (const char* v : {"a", "b", "c"})
            m0.set_var(v, Value{std::uniform_int_distribution<int>(0, 2)(rng)});

        WhileConf w{c, init_mds(li), m0};
        for (int i = 0; i < 5000 && !is_stop(w.cmd); ++i) w = step_while(w, li).first;
        auto prog = std::make_shared<RiscProgram>(finalize(out));
        RiscConf r = make_risc_conf(prog, default_register_count, init_mds(li), m0);
        for (int i = 0; i < 5000 && !stops(r); ++i) r = step_risc(r, li).first;
        REQUIRE(is_stop(w.cmd));
        REQUIRE(stops(r));
        CHECK(w.mem == r.mem);
        CHECK(w.mds == r.mds);
    }
}
