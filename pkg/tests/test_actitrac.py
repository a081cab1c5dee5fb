import io
import random

import pytest

from overdx.actitrac import (
    RESIDUAL,
    ClusteringConfig,
    cluster,
    read_assignments_csv,
    result_from_assignments,
    write_assignments_csv,
)
from overdx.errors import ConfigError
from overdx.eventlog import EventLog, Trace, variants
from overdx.procmodel import log_fitness

from conftest import make_variant

ACTS = [chr(ord("a") + i) for i in range(13)]


def random_variants(rng, n_max=60):
    seen = {}
    for _ in range(rng.randint(1, n_max)):
        seq = tuple(rng.choice(ACTS) for _ in range(rng.randint(1, 7)))
        seen[seq] = seen.get(seq, 0) + rng.randint(1, 5)
    return [make_variant(s, f) for s, f in seen.items()]


def check_invariants(vs, res, cfg):
    ids = [v.member_case_ids for cl in res.clusters for v in cl.members]
    ids += [v.member_case_ids for v in res.residual]
    assert sorted(map(sorted, ids)) == sorted(sorted(v.member_case_ids) for v in vs)
    assert res.trace_count == sum(v.frequency for v in vs)
    assert len(res.clusters) <= cfg.max_clusters
    for cl in res.clusters:
        assert cl.trace_count >= cfg.min_cluster_size
        assert cl.fitness >= cfg.target_fitness
        assert log_fitness(cl.members, cl.model) == pytest.approx(cl.fitness)


def test_single_variant_cluster():
    res = cluster([make_variant("abc", 8)])
    assert len(res.clusters) == 1
    assert res.clusters[0].fitness == 1.0
    assert res.residual == ()


def test_two_families_separate():
    vs = [make_variant("abc", 6), make_variant("xyz", 6)]
    res = cluster(vs, ClusteringConfig(max_clusters=2))
    assert [[v.activities for v in cl.members] for cl in res.clusters] == [[tuple("abc")], [tuple("xyz")]]
    assert all(cl.fitness == 1.0 for cl in res.clusters)
    assert res.residual == ()


def test_zero_clusters():
    vs = [make_variant("abc", 6), make_variant("xyz", 6)]
    res = cluster(vs, ClusteringConfig(max_clusters=0))
    assert res.clusters == ()
    assert {v.activities for v in res.residual} == {tuple("abc"), tuple("xyz")}


def test_target_zero_takes_everything():
    rng = random.Random(4)
    vs = random_variants(rng, 30)
    res = cluster(vs, ClusteringConfig(target_fitness=0, max_clusters=10**6, min_cluster_size=1))
    assert len(res.clusters) == 1 and res.residual == ()


def test_small_clusters_dissolved():
    res = cluster([make_variant("abc", 2)], ClusteringConfig(min_cluster_size=4))
    assert res.clusters == () and len(res.residual) == 1


def test_empty_input():
    res = cluster([])
    assert res.clusters == () and res.residual == ()


def test_config_validation():
    with pytest.raises(ConfigError):
        ClusteringConfig(window=0)
    with pytest.raises(ConfigError):
        ClusteringConfig(sampling="random")
    with pytest.raises(ConfigError):
        cluster([make_variant("abc")], threads=0)


@pytest.mark.parametrize("sampling,distance", [("distance", "mean"), ("distance", "medoid"), ("frequency", "mean")])
def test_random_invariants(sampling, distance):
    rng = random.Random(hash((sampling, distance)) & 0xFFFF)
    cfg = ClusteringConfig(sampling=sampling, cluster_distance=distance)
    for _ in range(40):
        vs = random_variants(rng)
        check_invariants(vs, cluster(vs, cfg), cfg)


def test_input_order_irrelevant():
    rng = random.Random(9)
    vs = random_variants(rng)
    shuffled = vs[:]
    rng.shuffle(shuffled)
    assert cluster(vs) == cluster(shuffled)


def test_threads_do_not_change_result():
    rng = random.Random(12)
    for _ in range(10):
        vs = random_variants(rng)
        assert cluster(vs, threads=1) == cluster(vs, threads=4)


def test_assignments_round_trip():
    traces = [Trace(f"c{i}", tuple(s)) for i, s in enumerate(["abc"] * 5 + ["xyz"] * 5 + ["ax"])]
    log = EventLog(tuple(traces), frozenset(ACTS + ["x", "y", "z"]))
    res = cluster(variants(log))
    buf = io.StringIO()
    write_assignments_csv(res, buf)
    table = read_assignments_csv(io.StringIO(buf.getvalue()))
    assert table == res.assignments()
    assert table["c10"] == RESIDUAL
    again = result_from_assignments(log, table)
    assert again.assignments() == res.assignments()
    assert [c.fitness for c in again.clusters] == [c.fitness for c in res.clusters]
