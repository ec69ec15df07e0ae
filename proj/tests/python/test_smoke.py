import math

import pytest

import interlace

G0 = 1.516386059151978


def test_green_values():
    assert interlace.green([0, 0, 0]) == pytest.approx(G0, abs=1e-10)
    assert interlace.green([1, 0, 0]) == pytest.approx(G0 - 1, abs=1e-10)
    assert interlace.green_stopped([0, 0, 0], [1, 0, 0], 1) == pytest.approx(1 / 6)


def test_capacity_of_a_point():
    res = interlace.capacity([[0, 0, 0]])
    assert res["cap"] == pytest.approx(1 / G0, rel=1e-9)
    assert res["mass"] == pytest.approx([1 / G0], rel=1e-9)


def test_hitting_and_sandwich():
    q, err = interlace.hit_probability([2, 0, 0], [[0, 0, 0]], 4)
    assert q == pytest.approx(58 / 1296, rel=1e-12)
    lo, hi = interlace.hit_sandwich([3, 1, 0], [[0, 0, 0], [1, 0, 0]])
    exact, err = interlace.hit_probability([3, 1, 0], [[0, 0, 0], [1, 0, 0]])
    assert lo - 1e-12 <= exact <= hi + 1e-12


def test_combinatorics():
    assert [interlace.beta(d) for d in range(3, 8)] == [1, 2, 3, 4, 6]
    assert interlace.a_seq(4, 0.0, 2) == pytest.approx(1.5)
    assert interlace.a_seq(6, 0.1, 9) == pytest.approx(interlace.a_closed(6, 0.1, 9), abs=1e-12)


def test_field_and_distance(tmp_path):
    f = interlace.sample_ball(3, 6, 1.5, seed=3)
    sites = f.sites()
    assert len(sites) > 0
    assert f.occupied(sites[0])
    rho, flagged = f.distance(sites[0], sites[0])
    assert rho == 0
    path = tmp_path / "field.bin"
    f.save(str(path))
    g = interlace.Field.load(str(path))
    assert g.sites() == sites
    assert interlace.sample_ball(3, 6, 0.0).sites() == []


def test_errors_map_to_exception():
    with pytest.raises(interlace.InterlaceError, match="NotInSet"):
        f = interlace.sample_ball(3, 4, 0.0)
        f.distance([0, 0, 0], [1, 0, 0])
    with pytest.raises(interlace.InterlaceError, match="ConfigError"):
        interlace.run("[shape]\nsizes = 2\n")


def test_run_reproducible():
    text = "[torus]\nsizes = 8, 10\nu = 2\nreplicas = 2\npairs = 3\n"
    a, b = interlace.run(text), interlace.run(text)
    strip = lambda csv: [line.rsplit(",", 1)[0] for line in csv.splitlines()]
    assert strip(a["csv"]) == strip(b["csv"])
    assert a["csv"].startswith("experiment,config_hash,replica,metric,value,flag,wall_ms")
    assert all(isinstance(name, str) for name, _, _ in a["checks"])
    assert math.isfinite(a["values"]["q99|N=8"])
