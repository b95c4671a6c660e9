import numpy as np
import pytest
from scipy import stats

from byzvi.attacks import AttackSpec
from byzvi.checkcomp import (CheckConfig, WorkerRoster, accept_candidate,
                             select_check_pairs, update_roster, verify)
from byzvi.errors import ConfigError, ProtocolError
from byzvi.game import generate
from byzvi.methods import MethodSpec, SgdaCC
from byzvi.rng import Stream, key_stream
from byzvi.world import Cluster


def reports_1d(values):
    return [(i, np.array([v])) for i, v in enumerate(values)]


def test_accept_all_reports_at_mean():
    cfg = CheckConfig(radius=2.0, sigma=1.0)
    g = np.array([1.5])
    assert accept_candidate(g, reports_1d([1.5, 1.5, 1.5]), cfg)


def test_reject_when_nobody_is_close():
    # 1-d reports {0,0,0,10Cs}: mean 2.5Cs is more than Cs from everyone
    cfg = CheckConfig(radius=5.0, sigma=2.0)
    cs = cfg.radius * cfg.sigma
    vals = [0.0, 0.0, 0.0, 10 * cs]
    g = np.array([np.mean(vals)])
    assert not accept_candidate(g, reports_1d(vals), cfg)


def test_exactly_half_within_radius_accepts():
    cfg = CheckConfig(radius=1.0, sigma=1.0)
    vals = [-0.5, 0.5, 10.0, -10.0]  # mean 0; two within radius 1
    g = np.array([0.0])
    assert accept_candidate(g, reports_1d(vals), cfg)


def test_select_pairs_two_workers():
    pairs = set()
    for rnd in range(50):
        c, u = select_check_pairs([4, 9], 1, key_stream(0, Stream.CHECK, 0, rnd))
        assert len(c) == len(u) == 1
        pairs.add((c[0], u[0]))
    assert pairs == {(4, 9), (9, 4)}


def test_pairs_disjoint_and_degrade():
    c, u = select_check_pairs(list(range(10)), 3, key_stream(1, Stream.CHECK))
    assert not (set(c) & set(u))
    c, u = select_check_pairs([1, 2, 3], 5, key_stream(2, Stream.CHECK))
    assert len(c) == len(u) == 1  # degraded to floor(3/2)


def test_pair_selection_uniform():
    counts = np.zeros((10, 10))
    for rnd in range(10 ** 4):
        c, u = select_check_pairs(list(range(10)), 1, key_stream(3, Stream.CHECK, 0, rnd))
        counts[c[0], u[0]] += 1
    off_diag = counts[~np.eye(10, dtype=bool)]
    assert stats.chisquare(off_diag).pvalue > 0.01


def test_q_value_formula():
    cfg = CheckConfig(radius=10.0, sigma=1.0)
    assert cfg.q_value(20, 4, 1) == pytest.approx(2 * 100 + 12 + 12 / 11)
    with pytest.raises(ConfigError):
        cfg.q_value(10, 5, 1)


def test_roster_invariants():
    r = WorkerRoster.create(6, [4, 5], m=1)
    assert r.active == (0, 1, 2, 3, 4, 5)
    with pytest.raises(ConfigError):
        WorkerRoster(n=4, good=frozenset({0, 1}), byz=frozenset({1, 2, 3}), m=1)


def test_update_roster_bans_pairs():
    r = WorkerRoster.create(6, [4, 5], m=1)
    r1 = update_roster(r, [], new_checking=[2])
    assert r1.banned == frozenset() and r1.checking == {2}
    r2 = update_roster(r1, [(1, 4)], new_checking=[0])
    assert r2.banned == {1, 4}
    assert r2.banned_byz == 1 and r2.banned_good == 1
    assert 4 not in r2.active and 0 not in r2.active


def cc_cluster(seed, attack, n=8, byz=(6, 7), batch=2):
    game = generate(20, 4, 0.5, 5.0, 17)
    cluster = Cluster(game, n, byz, attack, batch, seed)
    return game, cluster


def test_verify_good_and_byzantine_workers():
    game, cluster = cc_cluster(5, AttackSpec(kind="bf", policy="always"))
    x = np.zeros(4)
    honest = cluster.honest_phase(x, 0, 0, 0, range(8))
    subs = cluster.attack_submissions(honest, x, 0, 0, 0, cluster.byz)
    cluster.record_phase(0, 0, x, 0, subs)
    # good worker matches its recomputation
    assert verify(0, 0, 0, subs[0], cluster)
    # violating Byzantine does not
    assert not verify(6, 0, 0, subs[6], cluster)
    # a Byzantine that followed the protocol matches
    honest1 = cluster.honest_phase(x, 1, 0, 0, range(8))
    subs_clean = cluster.attack_submissions(honest1, x, 1, 0, 0, frozenset())
    cluster.record_phase(1, 0, x, 0, subs_clean)
    assert verify(6, 1, 0, subs_clean[6], cluster)


def test_verify_requires_history():
    game, cluster = cc_cluster(6, AttackSpec(kind="none"))
    with pytest.raises(ProtocolError):
        verify(0, 99, 0, np.zeros(4), cluster)


def run_until_banned(seed, max_rounds=400, n=10):
    """Rounds until the single always-violating Byzantine is banned."""
    game = generate(20, 4, 0.5, 5.0, 23)
    atk = AttackSpec(kind="bf", policy="always")
    cluster = Cluster(game, n, [n - 1], atk, 1, seed)
    roster = WorkerRoster.create(n, [n - 1], m=1)
    sigma = 4.0  # generous radius so honest rounds always accept
    stepper = SgdaCC(MethodSpec(kind="sgda-cc", gamma=0.01), cluster, roster,
                     CheckConfig(radius=10.0, sigma=sigma), np.zeros(4))
    for t in range(1, max_rounds + 1):
        stepper.step()
        if stepper.roster.banned_byz == 1:
            return t
    return max_rounds + 1


def test_violator_detection_time_dominated_by_geometric():
    times = np.array([run_until_banned(s) for s in range(60)])
    assert (times <= 400).all()
    # detection beats the m/n-per-round coin at every quartile
    geom = stats.geom(p=1 / 10)
    for q in (0.25, 0.5, 0.75):
        assert np.quantile(times, q) <= geom.ppf(q) + 3


def test_bans_stop_once_all_byzantines_gone():
    game = generate(20, 4, 0.5, 5.0, 29)
    atk = AttackSpec(kind="bf", policy="always")
    cluster = Cluster(game, 8, [7], atk, 1, 3)
    stepper = SgdaCC(MethodSpec(kind="sgda-cc", gamma=0.01), cluster,
                     WorkerRoster.create(8, [7], m=1),
                     CheckConfig(radius=10.0, sigma=4.0), np.zeros(4))
    for _ in range(200):
        stats_ = stepper.step()
    roster = stepper.roster
    assert roster.banned_byz == 1
    assert roster.banned_good <= 1  # at most the checker that caught it
    assert stats_.violations == 0  # nothing left to violate
