"""Inverse design: plans, fitness, parent selection, recombination, the loop."""

from __future__ import annotations

import json
import math
import random
import statistics

import pytest

from mofsmith.core import Gene, Objective, ObjectiveKind, parse_gene
from mofsmith.generator import (BuilderConfig, BuilderFailed,
                                BuilderUnavailable, ExhaustedSpace, GAConfig,
                                GenPlan, Generation, EvaluatedGene, IQR_FLOOR,
                                MalformedPlan, NoParents,
                                ObjectiveCountMismatch, build_structure,
                                fitness, iqr, objective_score, parse_gen_plan,
                                parse_objective, pool_entries,
                                pool_normalizers, propose_children,
                                registry_surrogate, result_to_json, run_ga,
                                select_parents, write_generation_csv,
                                write_result_json)
from mofsmith.predictor import ModelMiss, UnknownProperty


# --- plan parsing ----------------------------------------------------------------

class TestParseObjective:
    def test_forms(self):
        assert parse_objective("max") == Objective(kind=ObjectiveKind.MAX)
        assert parse_objective(" MIN ") == Objective(kind=ObjectiveKind.MIN)
        assert parse_objective("near 38") == \
            Objective(kind=ObjectiveKind.NEAR, target=38.0)
        assert parse_objective("range 30 40") == \
            Objective(kind=ObjectiveKind.RANGE, low=30.0, high=40.0)

    @pytest.mark.parametrize("text", [
        "", "max 3", "near", "near abc", "range 1", "range 1 2 3", "between 1 2",
    ])
    def test_malformed(self, text):
        with pytest.raises(MalformedPlan):
            parse_objective(text)


class TestParseGenPlan:
    def test_single_property(self, registry):
        plan = parse_gen_plan("Property: hydrogen_uptake\nObjective: near 38",
                              registry)
        assert plan.properties == ["hydrogen_uptake"]
        assert plan.objectives == [parse_objective("near 38")]

    def test_case_insensitive_and_backticks(self, registry):
        plan = parse_gen_plan("property: `HYDROGEN_UPTAKE`\nobjective: max",
                              registry)
        assert plan.properties == ["hydrogen_uptake"]

    def test_comma_separated_pairs(self, registry):
        plan = parse_gen_plan(
            "Property: hydrogen_uptake, void_fraction\nObjective: near 38, max",
            registry)
        assert plan.properties == ["hydrogen_uptake", "void_fraction"]
        assert plan.objectives[1].kind is ObjectiveKind.MAX

    def test_free_text_lines_ignored(self, registry):
        text = ("Look-up table: gene_pool\n"
                "Property: hydrogen_uptake\n"
                "Genetic algorithm: breed until convergence\n"
                "Objective: min\n"
                "Final thought: report the best")
        assert parse_gen_plan(text, registry).properties == ["hydrogen_uptake"]

    def test_non_gene_property_rejected(self, registry):
        with pytest.raises(UnknownProperty):
            parse_gen_plan("Property: bandgap\nObjective: max", registry)

    def test_unknown_property(self, registry):
        with pytest.raises(UnknownProperty):
            parse_gen_plan("Property: melting_point\nObjective: max", registry)

    def test_missing_lines(self, registry):
        with pytest.raises(MalformedPlan):
            parse_gen_plan("Property: hydrogen_uptake", registry)
        with pytest.raises(MalformedPlan):
            parse_gen_plan("Objective: max", registry)

    def test_count_mismatch(self, registry):
        with pytest.raises(ObjectiveCountMismatch):
            parse_gen_plan("Property: hydrogen_uptake\nObjective: max, min",
                           registry)


class TestConfigValidation:
    def test_gen_plan_needs_a_property(self):
        with pytest.raises(MalformedPlan):
            GenPlan(properties=[], objectives=[])

    def test_ga_config_bounds(self):
        with pytest.raises(ValueError):
            GAConfig(cycles=-1)
        with pytest.raises(ValueError):
            GAConfig(parents_per_topology=0)
        with pytest.raises(ValueError):
            GAConfig(children_per_topology=0)
        with pytest.raises(ValueError):
            GAConfig(base_pool_size=0)
        with pytest.raises(ValueError):
            GAConfig(topologies=())


# --- fitness ----------------------------------------------------------------------

class TestFitness:
    def test_iqr(self):
        assert iqr([0.0, 1.0, 2.0, 3.0]) == pytest.approx(1.5)
        assert iqr([]) == IQR_FLOOR
        assert iqr([5.0, 5.0, 5.0]) == IQR_FLOOR

    def test_objective_score(self):
        near = Objective(kind=ObjectiveKind.NEAR, target=10.0)
        rng_ = Objective(kind=ObjectiveKind.RANGE, low=2.0, high=4.0)
        assert objective_score(6.0, Objective(kind=ObjectiveKind.MAX), 2.0) == -3.0
        assert objective_score(6.0, Objective(kind=ObjectiveKind.MIN), 2.0) == 3.0
        assert objective_score(7.0, near, 2.0) == 1.5
        assert objective_score(13.0, near, 2.0) == 1.5
        assert objective_score(3.0, rng_, 2.0) == 0.0
        assert objective_score(1.0, rng_, 2.0) == 0.5
        assert objective_score(5.0, rng_, 2.0) == 0.5

    def test_fitness_sums_scores(self):
        objectives = [Objective(kind=ObjectiveKind.NEAR, target=10.0),
                      Objective(kind=ObjectiveKind.MIN)]
        assert fitness((12.0, 4.0), objectives, [2.0, 4.0]) == pytest.approx(2.0)

    def test_pool_normalizers_match_manual_iqr(self, registry):
        pool = registry.pool()
        values = [v for v in pool.column_values("hydrogen_uptake") if v is not None]
        assert pool_normalizers(pool, ["hydrogen_uptake"]) == [iqr(values)]


# --- parent selection ---------------------------------------------------------------

def entries_for(values, topology="pcu"):
    return [EvaluatedGene(gene=Gene(topology, f"N{i + 1}", f"N{101 + i}"),
                          values=(v,), fitness=0.0)
            for i, v in enumerate(values)]


NEAR_10 = [Objective(kind=ObjectiveKind.NEAR, target=10.0)]


class TestSelectParents:
    def test_max_objective_ranks_descending(self):
        picked = select_parents(entries_for([5.0, 9.0, 1.0, 7.0]),
                                [Objective(kind=ObjectiveKind.MAX)], 2, [2.0])
        assert [e.values[0] for e in picked] == [9.0, 7.0]
        assert picked[0].fitness == -4.5

    def test_unwindowed_k_larger_than_pool_returns_all(self):
        picked = select_parents(entries_for([5.0, 9.0]),
                                [Objective(kind=ObjectiveKind.MIN)], 10, [1.0])
        assert [e.values[0] for e in picked] == [5.0, 9.0]

    def test_near_keeps_candidates_inside_the_window(self):
        # normalizer 2 -> initial window 10 +/- 1
        picked = select_parents(entries_for([0.0, 9.2, 10.0, 11.0, 20.0, 40.0]),
                                NEAR_10, 3, [2.0])
        assert [e.values[0] for e in picked] == [10.0, 9.2, 11.0]

    def test_window_doubles_until_enough_candidates(self):
        # window 10+/-1 holds three; one doubling to 10+/-2 admits the rest
        picked = select_parents(entries_for([10.0, 9.0, 11.0, 8.5, 12.0]),
                                NEAR_10, 5, [2.0])
        assert sorted(e.values[0] for e in picked) == [8.5, 9.0, 10.0, 11.0, 12.0]

    def test_exhausted_widening_takes_nearest_k(self):
        picked = select_parents(entries_for([10.0, 100.0, 200.0]), NEAR_10, 2, [2.0])
        assert [e.values[0] for e in picked] == [10.0, 100.0]

    def test_range_window_widens_by_half_normalizer_then_doubles(self):
        objective = [Objective(kind=ObjectiveKind.RANGE, low=10.0, high=12.0)]
        # widening 1 adds normalizer/2 = 1 on each side: [9, 13]
        picked = select_parents(entries_for([11.0, 9.5, 13.5, 50.0]),
                                objective, 2, [2.0])
        assert [e.values[0] for e in picked] == [11.0, 9.5]

    def test_empty_pool(self):
        with pytest.raises(NoParents):
            select_parents([], NEAR_10, 3, [2.0])

    def test_windowed_pool_smaller_than_k(self):
        with pytest.raises(NoParents):
            select_parents(entries_for([10.0, 11.0]), NEAR_10, 3, [2.0])


# --- child proposal -------------------------------------------------------------------

def genes(*specs):
    return [parse_gene(s) for s in specs]


class TestProposeChildren:
    def test_three_parents_yield_four_novel_children(self):
        # worked recombination example: three parents spanning a 3x3 grid
        parents = genes("pcu+V12+T31", "pcu+V24+T32", "pcu+V7+T12")
        children = propose_children(parents, 4, random.Random(0))
        assert len(children) == 4
        assert len(set(children)) == 4
        assert not set(children) & set(parents)
        for child in children:
            assert child.topology == "pcu"
            assert child.block1 in {"V12", "V24", "V7"}
            assert child.block2 in {"T31", "T32", "T12"}

    def test_single_parent_has_no_novel_combination(self):
        with pytest.raises(ExhaustedSpace):
            propose_children(genes("pcu+V1+T1"), 5, random.Random(0))

    def test_want_is_capped_by_remaining_grid(self):
        # ten parents over a 5x5 grid leave exactly fifteen novel combinations
        pairs = [(0, 0), (0, 1), (1, 0), (1, 2), (2, 3),
                 (2, 4), (3, 1), (3, 3), (4, 2), (4, 4)]
        parents = [Gene("dia", f"V{a}", f"T{b}") for a, b in pairs]
        assert len(set(parents)) == 10
        children = propose_children(parents, 100, random.Random(1))
        assert len(children) == 15
        assert len(set(children)) == 15
        assert not set(children) & set(parents)

    def test_exclude_set_respected(self):
        parents = genes("pcu+V1+T1", "pcu+V2+T2")
        blocked = Gene("pcu", "V1", "T2")
        children = propose_children(parents, 4, random.Random(0),
                                    exclude=frozenset({blocked}))
        assert children == [Gene("pcu", "V2", "T1")]

    def test_fully_excluded_grid_is_exhausted(self):
        parents = genes("pcu+V1+T1", "pcu+V2+T2")
        exclude = frozenset({Gene("pcu", "V1", "T2"), Gene("pcu", "V2", "T1")})
        with pytest.raises(ExhaustedSpace):
            propose_children(parents, 4, random.Random(0), exclude=exclude)

    def test_mixed_topologies_rejected(self):
        with pytest.raises(ValueError):
            propose_children(genes("pcu+V1+T1", "dia+V2+T2"), 2, random.Random(0))

    def test_deterministic_under_seed(self):
        parents = [Gene("acs", f"V{i}", f"T{i}") for i in range(6)]
        first = propose_children(parents, 10, random.Random(42))
        second = propose_children(parents, 10, random.Random(42))
        assert first == second

    def test_proposer_output_is_validated_and_topped_up(self):
        parents = genes("pcu+V1+T1", "pcu+V2+T2", "pcu+V3+T3")

        def proposer(ps, k):
            return [
                Gene("pcu", "V1", "T1"),    # a parent: rejected
                Gene("dia", "V1", "T2"),    # wrong topology: rejected
                Gene("pcu", "V9", "T2"),    # foreign block1: rejected
                Gene("pcu", "V1", "T2"),    # valid
                Gene("pcu", "V1", "T2"),    # duplicate: rejected
            ]

        children = propose_children(parents, 3, random.Random(0), proposer=proposer)
        assert children[0] == Gene("pcu", "V1", "T2")
        assert len(children) == 3
        assert len(set(children)) == 3

    def test_proposer_filling_whole_batch_skips_rng(self):
        parents = genes("pcu+V1+T1", "pcu+V2+T2")

        def proposer(ps, k):
            return [Gene("pcu", "V2", "T1"), Gene("pcu", "V1", "T2")]

        children = propose_children(parents, 2, random.Random(0), proposer=proposer)
        assert children == [Gene("pcu", "V2", "T1"), Gene("pcu", "V1", "T2")]


# --- generational loop -----------------------------------------------------------------

SMALL = GAConfig(cycles=2, topologies=("pcu", "dia"), parents_per_topology=10,
                 children_per_topology=10, seed=3)


def near(target):
    return GenPlan(properties=["hydrogen_uptake"],
                   objectives=[parse_objective(f"near {target}")])


class TestRunGa:
    def test_shape_and_generation_count(self, registry):
        result = run_ga(near(38), SMALL, registry.pool(),
                        registry_surrogate(registry))
        assert [run.topology for run in result.runs] == ["pcu", "dia"]
        for run in result.runs:
            assert [g.index for g in run.generations] == [0, 1, 2]
            assert len(run.generations[0].members) == 10

    def test_elite_best_fitness_never_worsens(self, registry):
        result = run_ga(near(38), SMALL, registry.pool(),
                        registry_surrogate(registry))
        for run in result.runs:
            fits = [g.elite_best.fitness for g in run.generations]
            assert all(a >= b for a, b in zip(fits, fits[1:]))

    def test_no_gene_evaluated_twice(self, registry):
        result = run_ga(near(38), SMALL, registry.pool(),
                        registry_surrogate(registry))
        for run in result.runs:
            seen = [m.gene for g in run.generations for m in g.members]
            assert len(seen) == len(set(seen))

    def test_children_recombine_only_pool_blocks(self, registry):
        pool = registry.pool()
        result = run_ga(near(38), SMALL, pool, registry_surrogate(registry))
        for run in result.runs:
            block1s = {g.block1 for g in (parse_gene(k) for k in pool.keys())
                       if g.topology == run.topology}
            block2s = {g.block2 for g in (parse_gene(k) for k in pool.keys())
                       if g.topology == run.topology}
            for gen in run.generations[1:]:
                for member in gen.members:
                    assert member.gene.topology == run.topology
                    assert member.gene.block1 in block1s
                    assert member.gene.block2 in block2s

    def test_identical_seeds_identical_results(self, registry):
        pool = registry.pool()
        surrogate = registry_surrogate(registry)
        first = run_ga(near(38), SMALL, pool, surrogate)
        second = run_ga(near(38), SMALL, pool, surrogate)
        assert result_to_json(first) == result_to_json(second)

    def test_different_seeds_may_differ_but_stay_valid(self, registry):
        pool = registry.pool()
        surrogate = registry_surrogate(registry)
        other = GAConfig(cycles=2, topologies=("pcu", "dia"),
                         parents_per_topology=10, children_per_topology=10, seed=4)
        result = run_ga(near(38), other, pool, surrogate)
        assert result.best.fitness <= result.runs[0].generations[0].elite_best.fitness

    def test_cycles_zero_returns_fittest_parent(self, registry):
        config = GAConfig(cycles=0, topologies=("pcu",), parents_per_topology=5,
                          children_per_topology=5, seed=0)
        result = run_ga(near(38), config, registry.pool(),
                        registry_surrogate(registry))
        (run,) = result.runs
        assert len(run.generations) == 1
        assert result.best == run.generations[0].elite_best
        assert result.best == run.generations[0].members[0]

    def test_best_is_global_minimum_over_elites(self, registry):
        result = run_ga(near(38), SMALL, registry.pool(),
                        registry_surrogate(registry))
        all_elites = [g.elite_best.fitness for run in result.runs
                      for g in run.generations]
        assert result.best.fitness == min(all_elites)
        assert result.best_gene is result.best.gene

    def test_surrogate_misses_are_discarded_not_fatal(self, registry):
        base = registry_surrogate(registry)

        def flaky(prop, ids):
            if any(int(g.split("+")[2][1:]) % 4 == 0 for g in ids):
                raise ModelMiss(ids[0])
            return base(prop, ids)

        result = run_ga(near(38), SMALL, registry.pool(), flaky)
        assert sum(run.discarded for run in result.runs) > 0
        for run in result.runs:
            for gen in run.generations[1:]:
                for member in gen.members:
                    assert int(str(member.gene).split("+")[2][1:]) % 4 != 0

    def test_ga_matches_exhaustive_search_on_small_spaces(self, registry):
        pool = registry.pool()
        surrogate = registry_surrogate(registry)
        normalizers = pool_normalizers(pool, ["hydrogen_uptake"])
        plan = near(36)
        for seed in range(10):
            config = GAConfig(cycles=2, topologies=("rtl",),
                              parents_per_topology=6, children_per_topology=400,
                              seed=seed)
            result = run_ga(plan, config, pool, surrogate)
            (run,) = result.runs
            gen0 = run.generations[0].members
            block1s = sorted({m.gene.block1 for m in gen0})
            block2s = sorted({m.gene.block2 for m in gen0})
            assert len(block1s) * len(block2s) <= 400
            space = [Gene("rtl", b1, b2) for b1 in block1s for b2 in block2s]
            best_exhaustive = min(
                fitness((surrogate("hydrogen_uptake", [str(g)])[0],),
                        plan.objectives, normalizers)
                for g in space)
            assert result.best.fitness == pytest.approx(best_exhaustive, abs=0)


class TestGenerationStats:
    def test_mean_and_sample_std(self):
        members = [EvaluatedGene(Gene("pcu", f"N{i}", "N101"), (v,), 0.0)
                   for i, v in enumerate([2.0, 4.0, 9.0])]
        gen = Generation(index=1, members=members, elite_best=members[0])
        assert gen.value_mean() == pytest.approx(5.0)
        assert gen.value_std() == pytest.approx(statistics.stdev([2.0, 4.0, 9.0]))

    def test_degenerate_sizes(self):
        elite = EvaluatedGene(Gene("pcu", "N1", "N101"), (1.0,), 0.0)
        assert Generation(index=1, members=[], elite_best=elite).value_mean() is None
        assert Generation(index=1, members=[], elite_best=elite).value_std() is None
        assert Generation(index=1, members=[elite], elite_best=elite).value_std() is None


# --- export -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_result(registry):
    return run_ga(near(38), SMALL, registry.pool(), registry_surrogate(registry))


class TestExport:
    @pytest.fixture()
    def result(self, small_result):
        return small_result

    def test_json_document(self, result):
        doc = result_to_json(result)
        json.dumps(doc)  # serializable
        assert doc["plan"]["objectives"] == [{"kind": "near", "target": 38.0}]
        assert doc["config"]["seed"] == 3
        assert doc["best"]["gene"] == str(result.best.gene)
        assert len(doc["topologies"]) == 2
        for run_doc in doc["topologies"]:
            assert len(run_doc["generations"]) == 3
            for gen_doc in run_doc["generations"]:
                for member in gen_doc["members"]:
                    assert set(member) == {"gene", "values", "fitness"}

    def test_write_result_json(self, result, tmp_path):
        path = write_result_json(result, tmp_path / "nested" / "out.json")
        text = path.read_text(encoding="utf-8")
        assert text.endswith("\n")
        assert json.loads(text) == result_to_json(result)

    def test_write_generation_csv(self, result, tmp_path):
        path = write_generation_csv(result, tmp_path / "gens.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "topology,generation,property,count,mean,std,elite_best_fitness"
        assert len(lines) == 1 + 2 * 3  # two topologies, three generations, one property
        assert lines[1].startswith("pcu,0,hydrogen_uptake,10,")


# --- structure building -------------------------------------------------------------------

class TestBuildStructure:
    def test_stub_is_deterministic_and_plausible(self):
        gene = Gene("rtl", "N5", "N103")
        ref = build_structure(gene)
        again = build_structure(gene)
        assert ref == again
        assert ref.source == "stub"
        assert ref.path is None
        a, b, c, alpha, beta, gamma = ref.cell
        for length in (a, b, c):
            assert 5.0 <= length <= 25.0
        assert (alpha, beta, gamma) == (90.0, 90.0, 90.0)
        assert build_structure(Gene("rtl", "N5", "N104")).cell != ref.cell

    def test_command_mode_records_output_path(self):
        gene = Gene("pcu", "N1", "N101")
        builder = BuilderConfig(command="true", args=("{gene}",),
                                output_template="out/{gene}.cif")
        ref = build_structure(gene, builder)
        assert ref.source == "command"
        assert ref.path == "out/pcu+N1+N101.cif"

    def test_command_failure(self):
        gene = Gene("pcu", "N1", "N101")
        with pytest.raises(BuilderFailed) as err:
            build_structure(gene, BuilderConfig(command="false"))
        assert "exit 1" in str(err.value)

    def test_missing_command(self):
        gene = Gene("pcu", "N1", "N101")
        with pytest.raises(BuilderFailed):
            build_structure(gene, BuilderConfig(command="/nonexistent/builder-xyz"))

    def test_empty_command_is_unavailable(self):
        with pytest.raises(BuilderUnavailable):
            build_structure(Gene("pcu", "N1", "N101"), BuilderConfig(command=""))


class TestRegistrySurrogate:
    def test_lookup_roundtrip(self, registry):
        surrogate = registry_surrogate(registry)
        assert surrogate("hydrogen_uptake", ["pcu+N1+N101"]) == [4.9232]

    def test_unknown_gene_misses(self, registry):
        surrogate = registry_surrogate(registry)
        with pytest.raises(ModelMiss):
            surrogate("hydrogen_uptake", ["pcu+N99+N999"])
