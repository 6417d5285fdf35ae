import numpy as np
import pytest

import oracles
from conftest import make_network
from gridlodf.dcflow import build_system, solve_flows
from gridlodf.factors import Perturbation, perturb
from gridlodf.outage import (CutSetOutage, Prediction, balance_delta, bridge_lodf,
                             classify_cut, cutset_flow_change, full_lodf_matrix,
                             influence_graph, localization_report,
                             outage_report_json, simple_path_prediction, tie_delta)
from gridlodf.topology import ParticipationProfile, block_decomposition
from gridlodf.util import GridError
from gridlodf.verify import random_connected_network


def tie_island():
    """Parent: external bus 9 feeding the path 1-2-3 over a bridge."""
    net = make_network(
        [(9, 1.0), (1, 0.0), (2, 0.0), (3, -1.0, True)],
        [(9, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)],
    )
    return net


def test_classify_two_triangles(two_triangles_bridge):
    islands = classify_cut(two_triangles_bridge, CutSetOutage(frozenset({3})))
    assert len(islands) == 2
    for isl in islands:
        assert len(isl.tie_lines) == 1
        assert isl.internal_tripped == frozenset()
        assert isl.tie_lines[0].line == 3
    a, b = islands
    assert set(a.nodes) == {1, 2, 3} and set(b.nodes) == {4, 5, 6}
    # Flow on the bridge runs 3 -> 4 (1.5 units), so island B imports.
    assert b.tie_lines[0].flow == pytest.approx(1.5)
    assert a.tie_lines[0].flow == pytest.approx(-1.5)
    assert a.slack == 3          # parent slack stays
    assert b.slack == 4          # smallest id otherwise


def test_classify_mixed_trip(two_triangles_bridge):
    islands = classify_cut(two_triangles_bridge, CutSetOutage(frozenset({3, 0})))
    a, b = islands
    assert a.internal_tripped == frozenset({0}) and len(a.tie_lines) == 1
    assert b.internal_tripped == frozenset() and len(b.tie_lines) == 1


def test_classify_zero_flow_trip():
    # Symmetric diamond: the cross line 2-3 carries nothing.
    net = make_network(
        [(1, 1.0, True), (2, 0.0), (3, 0.0), (4, -1.0)],
        [(1, 2, 1.0), (1, 3, 1.0), (2, 4, 1.0), (3, 4, 1.0), (2, 3, 1.0)],
    )
    islands = classify_cut(net, CutSetOutage(frozenset({4})))
    assert len(islands) == 1
    isl = islands[0]
    assert any("no pre-contingency flow" in w for w in isl.warnings)
    report = cutset_flow_change(isl)
    assert np.abs(report.delta_f).max() <= 1e-12


def test_classify_non_cut_degenerate(triangle):
    islands = classify_cut(triangle, CutSetOutage(frozenset({0})))
    assert len(islands) == 1
    assert islands[0].internal_tripped == frozenset({0})
    assert islands[0].tie_lines == ()


def test_tie_delta_and_balance(two_triangles_bridge):
    islands = classify_cut(two_triangles_bridge, CutSetOutage(frozenset({3})))
    b = islands[1]
    v = tie_delta(b)
    pos = b.network.bus_position
    assert v[pos[4]] == pytest.approx(1.5)
    assert v.sum() == pytest.approx(1.5)
    bal = balance_delta(b)
    assert bal.sum() == pytest.approx(1.5)
    p_post = b.network.injection_vector() + bal
    assert abs(p_post.sum()) <= 1e-9


def test_balance_concentrated():
    net = tie_island()
    islands = classify_cut(net, CutSetOutage(frozenset({0})),
                           alpha={3: 1.0})
    isl = next(i for i in islands if 3 in i.nodes)
    bal = balance_delta(isl)
    pos = isl.network.bus_position
    assert bal[pos[3]] == pytest.approx(1.0)
    assert bal[pos[1]] == 0.0 and bal[pos[2]] == 0.0


def test_no_tie_zero_deltas(triangle):
    islands = classify_cut(triangle, CutSetOutage(frozenset({0})))
    isl = islands[0]
    assert np.abs(tie_delta(isl)).max() == 0.0
    assert np.abs(balance_delta(isl)).max() == 0.0


def test_bridge_lodf_path_island():
    net = tie_island()
    islands = classify_cut(net, CutSetOutage(frozenset({0})), alpha={3: 1.0})
    isl = next(i for i in islands if 1 in i.nodes)
    # All rebalancing lands at bus 3: the whole import walks down the path.
    assert bridge_lodf(isl, 1, 0) == pytest.approx(-1.0)
    islands = classify_cut(net, CutSetOutage(frozenset({0})), alpha={2: 1.0})
    isl = next(i for i in islands if 1 in i.nodes)
    assert bridge_lodf(isl, 2, 0) == pytest.approx(0.0, abs=1e-12)


def test_bridge_lodf_endpoint_only_participant():
    net = tie_island()
    islands = classify_cut(net, CutSetOutage(frozenset({0})), alpha={1: 1.0})
    isl = next(i for i in islands if 1 in i.nodes)
    for parent_line in isl.parent_line_ids:
        assert bridge_lodf(isl, parent_line, 0) == pytest.approx(0.0, abs=1e-12)


def test_bridge_lodf_guards(two_triangles_bridge):
    islands = classify_cut(two_triangles_bridge, CutSetOutage(frozenset({3, 0})))
    a = islands[0]
    with pytest.raises(GridError) as err:
        bridge_lodf(a, 1, 3)
    assert err.value.code == "USE_CUTSET_OP"


def test_bridge_lodf_matches_resolve(two_triangles_bridge):
    net = two_triangles_bridge
    p = net.injection_vector()
    f_pre = oracles.pinv_flows(net, p)
    islands = classify_cut(net, CutSetOutage(frozenset({3})))
    for isl in islands:
        # Oracle: island solved from scratch with rebalanced injections.
        p_island = isl.network.injection_vector() + balance_delta(isl)
        f_post = oracles.pinv_flows(isl.network, p_island)
        for k, parent in enumerate(isl.parent_line_ids):
            expected = (f_post[k] - f_pre[parent]) / isl.tie_lines[0].flow
            assert bridge_lodf(isl, parent, 3) == pytest.approx(expected, abs=1e-9)


def test_cutset_reduces_to_glodf(triangle):
    from gridlodf.factors import glodf
    islands = classify_cut(triangle, CutSetOutage(frozenset({0})))
    report = cutset_flow_change(islands[0])
    assert np.abs(report.tie_term).max() == 0.0
    sys = build_system(triangle)
    K = glodf(sys, [0])
    f = solve_flows(sys, triangle.injection_vector())
    assert np.allclose(report.delta_f, K[:, 0] * f[0])


def test_cutset_reduces_to_bridge_term(two_triangles_bridge):
    islands = classify_cut(two_triangles_bridge, CutSetOutage(frozenset({3})))
    for isl in islands:
        report = cutset_flow_change(isl)
        assert np.abs(report.internal_term).max() == 0.0
        for k, parent in enumerate(report.lines):
            expected = bridge_lodf(isl, parent, 3) * isl.tie_lines[0].flow
            assert report.delta_f[k] == pytest.approx(expected, abs=1e-12)


def test_cutset_decomposition_additivity(two_triangles_bridge):
    islands = classify_cut(two_triangles_bridge, CutSetOutage(frozenset({3, 0})))
    for isl in islands:
        report = cutset_flow_change(isl)
        residual = report.delta_f - (report.internal_term + report.tie_term)
        assert np.abs(residual).max() <= 1e-12


def test_cutset_oracle_random():
    rng = np.random.default_rng(51)
    done = 0
    while done < 40:
        n = int(rng.integers(4, 11))
        net = random_connected_network(rng, n, int(rng.integers(n, 14)))
        trip = oracles.random_cut_set(rng, net)
        if trip is None:
            continue
        done += 1
        p = net.injection_vector()
        f_pre = oracles.pinv_flows(net, p)
        weights = {b.id: float(w) for b, w in
                   zip(net.buses, rng.uniform(0.1, 1.0, size=net.n))}
        islands = classify_cut(net, CutSetOutage(trip), alpha=weights)
        tol = 1e-8 * (1.0 + np.abs(f_pre).max())
        for isl in islands:
            if isl.network.m == 0:
                continue
            report = cutset_flow_change(isl)
            p_post = isl.network.injection_vector() + balance_delta(isl)
            assert abs(p_post.sum()) <= 1e-9
            tripped_local = sorted(isl.local_line(t) for t in isl.internal_tripped)
            kept_local, f_post = oracles.remove_and_resolve(
                isl.network, tripped_local, p_post)
            expected = f_post - np.array(
                [f_pre[isl.parent_line_ids[k]] for k in kept_local])
            assert np.abs(report.delta_f - expected).max() <= tol


def test_simple_path_prediction_butterfly(butterfly):
    # Attach an external feeder at wing-A tip bus 1 and trip it.
    net = make_network(
        [(9, 1.0), (1, 0.0), (2, 0.25), (3, 0.0, True), (4, -0.25), (5, -1.0)],
        [(9, 1, 1.0),
         (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0),
         (3, 4, 1.0), (3, 5, 1.0), (4, 5, 1.0)],
    )
    islands = classify_cut(net, CutSetOutage(frozenset({0})), alpha={2: 1.0})
    isl = next(i for i in islands if 1 in i.nodes)
    wing_a = [1, 2, 3]   # parent line ids inside wing A
    wing_b = [4, 5, 6]
    for parent in wing_a:
        assert simple_path_prediction(isl, parent, 0) == Prediction.NONZERO_AS
    for parent in wing_b:
        assert simple_path_prediction(isl, parent, 0) == Prediction.ZERO
    # Everyone participating puts every line on some simple path.
    islands = classify_cut(net, CutSetOutage(frozenset({0})))
    isl = next(i for i in islands if 1 in i.nodes)
    for parent in wing_a + wing_b:
        assert simple_path_prediction(isl, parent, 0) == Prediction.NONZERO_AS
    # Sole participant at the tie endpoint: everything is ZERO.
    islands = classify_cut(net, CutSetOutage(frozenset({0})), alpha={1: 1.0})
    isl = next(i for i in islands if 1 in i.nodes)
    for parent in wing_a + wing_b:
        assert simple_path_prediction(isl, parent, 0) == Prediction.ZERO


def test_prediction_zero_implies_small_factor():
    rng = np.random.default_rng(52)
    for trial in range(15):
        base = random_connected_network(rng, 6, 8)
        net_lines = [(ln.tail, ln.head, ln.reactance) for ln in base.lines]
        ids = [b.id for b in base.buses]
        j_hat = int(rng.choice(ids))
        sink = int(rng.choice(ids))
        # External feeder at j_hat; absorb its unit at a random sink so the
        # parent stays balanced.
        spec_buses = [(99, 1.0)] + [
            (b.id, b.injection - (1.0 if b.id == sink else 0.0), b.is_slack)
            for b in base.buses
        ]
        net = make_network(spec_buses, [(99, j_hat, 1.0)] + net_lines)
        participant = int(rng.choice(ids))
        islands = classify_cut(net, CutSetOutage(frozenset({0})),
                               alpha={participant: 1.0})
        isl = next(i for i in islands if j_hat in i.nodes)
        report = cutset_flow_change(isl)
        for k, parent in enumerate(report.lines):
            if simple_path_prediction(isl, parent, 0) == Prediction.ZERO:
                assert abs(report.delta_f[k] / isl.tie_lines[0].flow) <= 1e-9


def test_localization_flags(two_triangles_bridge):
    islands = classify_cut(two_triangles_bridge, CutSetOutage(frozenset({3, 0})),
                           alpha={2: 1.0, 5: 1.0})
    a = next(i for i in islands if 1 in i.nodes)
    report = cutset_flow_change(a)
    # Wing with the tripped line and the participating path is all unflagged.
    assert not any(report.predicted_zero)
    flags = localization_report(a)
    assert flags == report.predicted_zero
    # Island B has no internal trips; only its cell is on the tie-participant
    # path, so nothing is certified there either (participant 5 inside).
    b = next(i for i in islands if 4 in i.nodes)
    report_b = cutset_flow_change(b)
    assert not any(report_b.predicted_zero)


def test_localization_certifies_off_path_cell():
    # Butterfly fed at a wing-A tip; the only participant is also in wing A,
    # so every wing-B line is certified zero and really is zero.
    net = make_network(
        [(9, 1.0), (1, 0.0), (2, 0.0), (3, 0.0, True), (4, 0.0), (5, -1.0)],
        [(9, 1, 1.0),
         (1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0),
         (3, 4, 1.0), (3, 5, 1.0), (4, 5, 1.0)],
    )
    islands = classify_cut(net, CutSetOutage(frozenset({0})), alpha={2: 1.0})
    isl = islands[1] if 1 in islands[1].nodes else islands[0]
    report = cutset_flow_change(isl)
    flagged = {parent: z for parent, z in zip(report.lines, report.predicted_zero)}
    assert not flagged[1] and not flagged[2] and not flagged[3]
    wing_b = [report.lines.index(k) for k in (4, 5, 6)]
    assert np.abs(report.delta_f[wing_b]).max() <= 1e-12
    assert flagged[4] and flagged[5] and flagged[6]


def test_full_lodf_triangle(triangle):
    fs = full_lodf_matrix(triangle)
    K = fs.lodf
    assert np.allclose(np.diag(K), -1.0)
    off = K[~np.eye(3, dtype=bool)]
    assert np.allclose(np.abs(off), 1.0)
    assert fs.column_kind == ("non_bridge",) * 3
    assert fs.block_order == (0, 1, 2)


def test_full_lodf_path_dense(path3):
    fs = full_lodf_matrix(path3)
    assert fs.column_kind == ("bridge", "bridge")
    # All buses participate: tripping either bridge changes the other's flow.
    assert np.abs(fs.lodf[0, 1]) > 1e-12
    assert np.abs(fs.lodf[1, 0]) > 1e-12


def test_full_lodf_bridge_column_values(two_triangles_bridge):
    net = two_triangles_bridge
    fs = full_lodf_matrix(net)
    p = net.injection_vector()
    f_pre = oracles.pinv_flows(net, p)
    # Oracle: resolve each island of the bridge trip with uniform balancing.
    islands = classify_cut(net, CutSetOutage(frozenset({3})))
    for isl in islands:
        p_post = isl.network.injection_vector() + balance_delta(isl)
        f_post = oracles.pinv_flows(isl.network, p_post)
        for k, parent in enumerate(isl.parent_line_ids):
            expected = (f_post[k] - f_pre[parent]) / f_pre[3]
            assert fs.lodf[parent, 3] == pytest.approx(expected, abs=1e-9)
    assert fs.lodf[3, 3] == -1.0
    assert fs.column_kind[3] == "bridge"
    # Block ordering: bridge first, then the two 3-line cells by line id.
    assert fs.block_order == (3, 0, 1, 2, 4, 5, 6)


def test_full_lodf_cross_cell_zero_blocks(two_triangles_bridge):
    fs = full_lodf_matrix(two_triangles_bridge)
    K = fs.lodf
    scale = np.nanmax(np.abs(K))
    for l in (0, 1, 2):
        for l_hat in (4, 5, 6):
            assert abs(K[l, l_hat]) <= 1e-9 * (1 + scale)
            assert abs(K[l_hat, l]) <= 1e-9 * (1 + scale)


def test_full_lodf_zero_flow_bridge_column():
    # Bridge carries nothing: column is zeroed and reported in diagnostics.
    net = make_network(
        [(1, 1.0), (2, -1.0), (3, 0.0, True), (4, 0.0)],
        [(1, 2, 1.0), (1, 3, 1.0), (3, 2, 1.0), (3, 4, 1.0)],
    )
    fs = full_lodf_matrix(net)
    assert 3 in fs.column_diagnostics
    col = fs.lodf[:, 3]
    assert col[3] == -1.0
    assert np.abs(col[[0, 1, 2]]).max() == 0.0


def test_influence_graph_thresholds(triangle):
    fs = full_lodf_matrix(triangle)
    assert len(influence_graph(fs.lodf, threshold=0.0)) == 3
    assert influence_graph(fs.lodf, threshold=1.5) == []


def test_influence_no_cross_cell_among_non_bridges(two_triangles_bridge):
    fs = full_lodf_matrix(two_triangles_bridge)
    K = fs.lodf.copy()
    bridge_cols = [k for k, kind in enumerate(fs.column_kind) if kind == "bridge"]
    K[:, bridge_cols] = 0.0
    K[bridge_cols, :] = 0.0
    dec = block_decomposition(two_triangles_bridge)
    for l, l_hat in influence_graph(K, threshold=0.005):
        assert dec.cell_of[l] == dec.cell_of[l_hat]


def test_outage_report_json_shape(two_triangles_bridge):
    islands = classify_cut(two_triangles_bridge, CutSetOutage(frozenset({3})))
    reports = [cutset_flow_change(i) for i in islands]
    doc = outage_report_json(islands, reports)
    assert len(doc["islands"]) == 2
    entry = doc["islands"][1]
    assert entry["tie"][0]["line"] == 3
    assert {d["line"] for d in entry["delta_f"]} == {4, 5, 6}
    assert all(set(d) == {"line", "value", "internal_term", "tie_term",
                          "predicted_zero"} for d in entry["delta_f"])
