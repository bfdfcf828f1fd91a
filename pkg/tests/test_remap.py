import math

import numpy as np
import pytest

from curveremap.clipping import wa_clip
from curveremap.integrate import Poly2, green_integral
from curveremap.mesh import (CurvilinearMesh, Field, exact_cell_averages,
                             gen_deformed_square_mesh)
from curveremap.remap import (RemapRequest, apply_plan, build_plan,
                              candidate_pairs, remap)
from curveremap.experiments import sin_field, cone_field


def test_identity_self_remap_reproduces_field():
    m = gen_deformed_square_mesh(4, "identity", degree=2)
    f = exact_cell_averages(m, sin_field)
    for order in (1, 3, 5):
        rep = remap(RemapRequest(m, f, m, order=order))
        assert np.abs(rep.field.averages - f.averages).max() <= 1e-12
        assert rep.e_cons <= 1e-13 * abs(f.averages @ m.cell_areas())
    assert rep.e_area_c <= 1e-12


def test_deformed_self_remap():
    m = gen_deformed_square_mesh(5, "gresho_like", 0.4, 2)
    f = exact_cell_averages(m, sin_field)
    rep = remap(RemapRequest(m, f, m, order=3))
    assert np.abs(rep.field.averages - f.averages).max() <= 1e-12


def test_constant_preservation_any_order():
    src = gen_deformed_square_mesh(6, "gresho_like", 0.45, 2, roughen=0.1)
    tgt = gen_deformed_square_mesh(6, "taylor_green_like", 0.05, 2, roughen=0.1)
    fc = Field(np.full(src.n_cells, 2.5), src)
    for order in (1, 3, 5):
        rep = remap(RemapRequest(src, fc, tgt, order=order))
        assert np.abs(rep.field.averages - 2.5).max() <= 1e-12


def test_candidate_pairs_identity_contains_self():
    m = gen_deformed_square_mesh(4, "identity", degree=2)
    pairs = set(candidate_pairs(m, m))
    for i in range(m.n_cells):
        assert (i, i) in pairs


def test_candidate_pairs_disjoint_domains_empty():
    a = gen_deformed_square_mesh(3, "identity", degree=2)
    shifted = CurvilinearMesh(a.points + np.array([10.0, 0.0]), a.edges,
                              a.cell_edges, a.cell_dirs)
    assert candidate_pairs(a, shifted) == []


def test_candidate_pairs_superset_of_true_overlaps():
    src = gen_deformed_square_mesh(8, "gresho_like", 0.35, 2, roughen=0.12)
    tgt = gen_deformed_square_mesh(8, "taylor_green_like", 0.04, 2, roughen=0.12)
    cands = set(candidate_pairs(src, tgt))
    drop = 1e-14 * min(src.cell_areas().min(), tgt.cell_areas().min())
    for i in range(src.n_cells):
        for t in range(tgt.n_cells):
            res = wa_clip(src.cell_polygon(i), tgt.cell_polygon(t))
            if res.total_area > drop:
                assert (i, t) in cands, (i, t)


def test_conservation_and_partition_small_pair():
    src = gen_deformed_square_mesh(6, "gresho_like", 0.35, 2, roughen=0.12)
    tgt = gen_deformed_square_mesh(6, "taylor_green_like", 0.04, 2, roughen=0.12)
    f = exact_cell_averages(src, sin_field)
    for order in (1, 3, 5):
        rep = remap(RemapRequest(src, f, tgt, order=order))
        total = abs(f.averages @ src.cell_areas())
        assert rep.e_cons <= 1e-12 * total
        assert rep.e_area_c <= 1e-10


def test_approach_cross_check_mode():
    src = gen_deformed_square_mesh(4, "gresho_like", 0.3, 2)
    tgt = gen_deformed_square_mesh(4, "taylor_green_like", 0.04, 2)
    f = exact_cell_averages(src, sin_field)
    rep = remap(RemapRequest(src, f, tgt, order=3, approach="both"))
    assert rep.max_ab_gap <= 1e-11
    rep_b = remap(RemapRequest(src, f, tgt, order=3, approach="B"))
    rep_a = remap(RemapRequest(src, f, tgt, order=3, approach="A"))
    assert np.abs(rep_a.field.averages - rep_b.field.averages).max() <= 1e-10


def test_per_intersection_ab_agreement_monomials():
    src = gen_deformed_square_mesh(5, "gresho_like", 0.35, 2, roughen=0.1)
    tgt = gen_deformed_square_mesh(5, "taylor_green_like", 0.04, 2, roughen=0.1)
    plan = build_plan(src, tgt, k_max=4, with_tris=True)
    worst = 0.0
    for per in plan.per_target:
        for pg in per:
            for lp in pg.loops:
                for (a, b) in ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1),
                               (0, 2), (2, 1), (2, 2), (4, 0), (0, 4)):
                    f = Poly2.monomial(a, b)
                    f2 = f.antideriv_x()
                    va = float(np.dot(f2.eval(lp.ax, lp.ay), lp.awdy))
                    vb = float(np.dot(f.eval(lp.bpts[:, 0], lp.bpts[:, 1]),
                                      lp.bjw))
                    worst = max(worst, abs(va - vb) / max(1.0, abs(va)))
    assert worst <= 1e-11


def test_positivity_limited_remap_floor():
    src = gen_deformed_square_mesh(8, "gresho_like", 0.35, 2, roughen=0.12)
    tgt = gen_deformed_square_mesh(8, "taylor_green_like", 0.04, 2, roughen=0.12)
    f = exact_cell_averages(src, cone_field, strict=False, max_levels=4)
    rep = remap(RemapRequest(src, f, tgt, order=3, positivity=True))
    assert rep.min_average >= 1e-14 * (1 - 1e-3)
    total = abs(f.averages @ src.cell_areas())
    assert rep.e_cons <= 1e-12 * total


def test_positivity_with_negative_field_warns_and_skips():
    src = gen_deformed_square_mesh(4, "identity", degree=2)
    tgt = gen_deformed_square_mesh(4, "taylor_green_like", 0.03, 2)
    avg = np.linspace(-1.0, 1.0, src.n_cells)
    rep = remap(RemapRequest(src, Field(avg, src), tgt, order=3,
                             positivity=True))
    assert any("limiter skipped" in w for w in rep.warnings)


def test_report_serialization():
    src = gen_deformed_square_mesh(3, "identity", degree=2)
    f = exact_cell_averages(src, sin_field)
    rep = remap(RemapRequest(src, f, src, order=1))
    text = rep.to_text()
    assert "e_cons=" in text and "min_average=" in text
    row = rep.to_csv_row()
    assert len(row.split(",")) == len(rep.CSV_HEADER.split(","))


def test_plan_rejects_mismatched_orders():
    src = gen_deformed_square_mesh(3, "identity", degree=2)
    plan = build_plan(src, src, k_max=0)
    f = exact_cell_averages(src, sin_field)
    with pytest.raises(ValueError):
        apply_plan(plan, f.averages, order=5)
    with pytest.raises(ValueError):
        apply_plan(plan, f.averages, order=1, approach="B")


def test_degree3_mesh_remap_end_to_end():
    src = gen_deformed_square_mesh(4, "gresho_like", 0.3, degree=3)
    tgt = gen_deformed_square_mesh(4, "taylor_green_like", 0.04, degree=3)
    f = exact_cell_averages(src, sin_field)
    rep = remap(RemapRequest(src, f, tgt, order=3, approach="both",
                             positivity=True))
    total = abs(f.averages @ src.cell_areas())
    assert rep.e_cons <= 1e-12 * total
    assert rep.e_area_c <= 1e-10
    assert rep.max_ab_gap <= 1e-11
    assert rep.min_average >= 1e-14
