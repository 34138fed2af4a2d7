import json

import numpy as np
import pytest

from delaydirac import DelayConfig, KernelSet, PotentialPair, Spectrum, WPair
from delaydirac import io as dio

PI = np.pi


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def _random_complex(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class TestCodecsRoundTrip:
    def test_potentials(self, tmp_path, rng):
        cfg = DelayConfig(0.42 * PI)
        grid = cfg.potential_grid(33)
        pot = PotentialPair(grid, _random_complex(rng, 33), _random_complex(rng, 33))
        path = tmp_path / "pot.csv"
        dio.write_potentials_csv(path, pot)
        back = dio.read_potentials_csv(path)
        assert np.array_equal(back.q, pot.q)
        assert np.array_equal(back.p, pot.p)
        assert back.grid.m == pot.grid.m
        assert back.grid.lo == pot.grid.lo and back.grid.hi == pot.grid.hi

    def test_spectrum(self, tmp_path, rng):
        lam = (np.arange(-7, 8) - 0.5 + 0.01 * _random_complex(rng, 15))
        spec = Spectrum(2, 1, 7, lam)
        path = tmp_path / "spec.csv"
        dio.write_spectrum_csv(path, spec)
        back = dio.read_spectrum_csv(path)
        assert (back.nu, back.j, back.n_max) == (2, 1, 7)
        assert np.array_equal(back.lam, spec.lam)

    def test_spectrum_without_metadata_needs_branch(self, tmp_path):
        path = tmp_path / "spec.csv"
        lines = [dio.SPECTRUM_HEADER] + [f"{n},{float(n)},0" for n in range(-2, 3)]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError):
            dio.read_spectrum_csv(path)
        back = dio.read_spectrum_csv(path, nu=1, j=1)
        assert back.n_max == 2

    def test_kernels(self, tmp_path, rng):
        cfg = DelayConfig(0.42 * PI)
        grid = cfg.kernel_grid(17)
        arrs = [_random_complex(rng, grid.m) for _ in range(4)]
        ker = KernelSet(1, grid, *arrs)
        path = tmp_path / "ker.csv"
        dio.write_kernels_csv(path, ker)
        back = dio.read_kernels_csv(path)
        assert back.nu == 1
        for name in ("v1", "v2", "u1", "u2"):
            assert np.array_equal(getattr(back, name), getattr(ker, name))

    def test_wpair(self, tmp_path, rng):
        cfg = DelayConfig(0.42 * PI)
        grid = cfg.potential_grid(21)
        w = WPair(2, grid, _random_complex(rng, 21), _random_complex(rng, 21))
        path = tmp_path / "w.csv"
        dio.write_wpair_csv(path, w)
        back = dio.read_wpair_csv(path)
        assert back.nu == 2
        assert np.array_equal(back.w1, w.w1)
        assert np.array_equal(back.w2, w.w2)

    def test_config(self, tmp_path):
        conf = {"a": 0.42 * PI, "M": 64, "N": 10,
                "potential": {"type": "trig", "q": {"sin": [[0.3, 0.0]]}, "p": {}}}
        path = tmp_path / "conf.json"
        dio.write_json(path, conf)
        back = dio.load_config(path)
        assert back["a"] == conf["a"]
        assert back["M"] == 64 and back["N"] == 10
        assert back["potential"] == conf["potential"]
        # defaults filled in
        assert back["support_gate"] == dio.DEFAULT_SUPPORT_GATE

    def test_config_unknown_key(self):
        with pytest.raises(ValueError):
            dio.parse_config({"a": 1.5, "bogus": 1})


class TestPotentialBuilders:
    def test_trig_endpoint_vanishing(self):
        cfg = DelayConfig(0.42 * PI)
        conf = {"M": 65, "potential": {"type": "trig",
                                       "q": {"sin": [[1.0, 0.0]]},
                                       "p": {"sin": [[0.0, 0.0], [0.5, -0.5]]}}}
        pot = dio.potential_from_config(conf, cfg)
        assert pot.q[0] == 0 and abs(pot.q[-1]) < 1e-15  # sin(pi) in floats
        assert pot.p[0] == 0 and abs(pot.p[-1]) < 1e-15
        mid = 32
        assert pot.q[mid] == pytest.approx(1.0)  # sin(pi/2) at the midpoint

    def test_trig_cosine_terms(self):
        cfg = DelayConfig(0.42 * PI)
        conf = {"M": 11, "potential": {"type": "trig", "q": {"cos": [[2.0, 1.0]]}, "p": {}}}
        pot = dio.potential_from_config(conf, cfg)
        assert np.allclose(pot.q, 2.0 + 1.0j)

    def test_samples_potential(self, tmp_path, rng):
        cfg = DelayConfig(0.42 * PI)
        grid = cfg.potential_grid(19)
        pot = PotentialPair(grid, _random_complex(rng, 19), _random_complex(rng, 19))
        path = tmp_path / "pot.csv"
        dio.write_potentials_csv(path, pot)
        conf = {"M": 19, "potential": {"type": "samples", "path": str(path)}}
        back = dio.potential_from_config(conf, cfg)
        assert np.array_equal(back.q, pot.q)

    def test_samples_wrong_interval(self, tmp_path, rng):
        cfg_a = DelayConfig(0.42 * PI)
        cfg_b = DelayConfig(0.45 * PI)
        grid = cfg_a.potential_grid(9)
        pot = PotentialPair(grid, np.zeros(9, complex), np.zeros(9, complex))
        path = tmp_path / "pot.csv"
        dio.write_potentials_csv(path, pot)
        conf = {"M": 9, "potential": {"type": "samples", "path": str(path)}}
        with pytest.raises(ValueError):
            dio.potential_from_config(conf, cfg_b)


class TestAtomicWrites:
    def test_write_and_replace(self, tmp_path):
        path = tmp_path / "x.txt"
        dio.atomic_write_text(path, "one\n")
        dio.atomic_write_text(path, "two\n")
        assert path.read_text() == "two\n"
        assert list(tmp_path.iterdir()) == [path]

    def test_deterministic_json(self, tmp_path):
        path_a = tmp_path / "a.json"
        path_b = tmp_path / "b.json"
        payload = {"zeta": 1.0 / 3.0, "alpha": [1e-17, 2.5]}
        dio.write_json(path_a, payload)
        dio.write_json(path_b, json.loads(path_a.read_text()))
        assert path_a.read_bytes() == path_b.read_bytes()
