import math

import numpy as np
import pytest

from delaycert.core import StateSpace
from delaycert.delays import make_delay, make_kernel
from delaycert.errors import ConfigurationError
from delaycert.models import (Feedback, MemoryKernel, WaveMemoryParams, build_damped_wave, build_plate,
                              build_scalar, build_wave_memory, clamped_biharmonic, dirichlet_stiffness, nodes,
                              nonlinearity_catalog)
from delaycert.semigroup import Generator, certify_growth_bound, dissipativity_check
from delaycert.solver import picard_solve
from oracles import CLAMPED_BEAM_CONSTANT, clamped_beam_root, dirichlet_laplacian


def fb(region, k0=0.05, tau=0.3):
    return Feedback(make_delay({"kind": "constant", "value": tau}),
                    make_kernel({"kind": "exp_decay_kernel", "k0": k0, "rate": 1.0}), region=region)


def uv_block(sys_, n):
    idx = slice(0, 2 * n)
    return Generator(sys_.generator.matrix[idx, idx], StateSpace(sys_.space.gram[idx, idx]))


class TestStencils:
    def test_laplacian_matches_entrywise_oracle(self):
        np.testing.assert_allclose(dirichlet_stiffness(9), dirichlet_laplacian(9), rtol=1e-14)

    def test_laplacian_second_order(self):
        errs = [abs(np.linalg.eigvalsh(dirichlet_stiffness(n))[0] - math.pi**2) for n in (15, 31, 63)]
        for e1, e2 in zip(errs, errs[1:]):
            assert 3.8 <= e1 / e2 <= 4.2

    def test_biharmonic_spd_and_converging(self):
        assert clamped_beam_root() ** 4 == pytest.approx(CLAMPED_BEAM_CONSTANT, rel=1e-12)
        lam = []
        for n in (40, 80, 160):
            k = clamped_biharmonic(n)
            np.testing.assert_allclose(k, k.T)
            lam.append(np.linalg.eigvalsh(k)[0])
        assert lam[0] > 0
        gaps = [abs(v - CLAMPED_BEAM_CONSTANT) for v in lam]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] / CLAMPED_BEAM_CONSTANT < 0.05

    def test_biharmonic_needs_five_nodes(self):
        with pytest.raises(ConfigurationError):
            clamped_biharmonic(4)


class TestScalar:
    def test_free_decay(self):
        rep = picard_solve(build_scalar(2.0), 3.0, 0.01)
        np.testing.assert_allclose(rep.trajectory.norms, np.exp(-2.0 * rep.trajectory.grid), rtol=1e-12)

    def test_certificate(self):
        sys_ = build_scalar(1.5)
        assert sys_.m == 1.0 and sys_.omega == 1.5

    def test_rejects_nonpositive_a(self):
        with pytest.raises(ConfigurationError):
            build_scalar(0.0)


class TestDampedWave:
    def test_single_node_characteristic_polynomial(self):
        sys_ = build_damped_wave(1, 1.0)
        ev = np.sort_complex(np.linalg.eigvals(sys_.generator.matrix))
        np.testing.assert_allclose(ev, np.sort_complex(np.roots([1.0, 1.0, 8.0])), rtol=1e-12)

    def test_undamped_is_skew(self):
        sys_ = build_damped_wave(12, 0.0)
        assert abs(dissipativity_check(sys_.generator, seed=1)) <= 1e-10

    def test_full_damping_decays(self):
        sys_ = build_damped_wave(10, 1.0)
        real = np.linalg.eigvals(sys_.generator.matrix).real
        assert np.all(real < 0)
        assert 0 < sys_.omega <= -real.max() + 1e-12

    def test_regions_must_cover_damping_set(self):
        with pytest.raises(ConfigurationError):
            build_damped_wave(6, 1.0, damping_nodes=[0, 1, 2], feedback=[fb([0, 1])])

    def test_regions_disjoint(self):
        with pytest.raises(ConfigurationError):
            build_damped_wave(6, 1.0, feedback=[fb([0, 1, 2, 3]), fb([3, 4, 5])])

    def test_validates(self):
        n = 8
        sys_ = build_damped_wave(n, 1.0, feedback=[fb(list(range(n)))], f_kind="sine", f_scale=0.2,
                                 u0=np.sin(math.pi * nodes(n)))
        sys_.validate(10.0)


def memory(n=6, ns=4, mu0=0.5, delta=1.0, **kw):
    return WaveMemoryParams(n, ns, MemoryKernel(mu0, delta), **kw)


class TestWaveMemory:
    def test_dimensions(self):
        sys_ = build_wave_memory(memory(5, 3))
        assert sys_.dim == 5 + 5 + 15

    def test_dissipative(self):
        assert dissipativity_check(build_wave_memory(memory(10, 8)).generator, seed=0) <= 1e-10

    def test_tiny_memory_approaches_wave(self):
        n = 8
        sys_ = build_wave_memory(memory(n, 4, mu0=1e-8))
        assert dissipativity_check(sys_.generator) <= 1e-10
        block = uv_block(sys_, n)
        assert abs(dissipativity_check(block)) <= 1e-10
        np.testing.assert_allclose(block.matrix[n:, :n], -dirichlet_stiffness(n), rtol=1e-7)

    def test_single_node_block(self):
        sys_ = build_wave_memory(memory(1, 4, mu0=0.5, delta=1.0))
        block = sys_.generator.matrix[:2, :2]
        ev = np.sort(np.linalg.eigvals(block).imag)
        w = math.sqrt((1 - 0.5) * 8.0)
        np.testing.assert_allclose(ev, [-w, w], rtol=1e-12)

    def test_memory_tail_and_mu_tilde(self):
        k = MemoryKernel(0.3, 2.0)
        assert k.mu_tilde == pytest.approx(0.15)
        assert k.tail(k.horizon()) <= 1e-10 * (1 + 1e-9)

    def test_kernel_hypotheses(self):
        with pytest.raises(ConfigurationError):
            MemoryKernel(1.0, 0.5)  # mu~ = 2
        with pytest.raises(ConfigurationError):
            MemoryKernel(0.0, 1.0)

    def test_regions_must_cover(self):
        with pytest.raises(ConfigurationError):
            build_wave_memory(memory(6, 2, feedback=[fb([0, 1, 2])]))

    def test_history_from_past_displacement(self):
        n, ns = 4, 3
        vel = np.arange(1.0, n + 1)
        u0 = np.ones(n)
        sys_ = build_wave_memory(memory(n, ns, s_max=30.0, u0=u0, past=lambda t: u0 + t * vel))
        eta = sys_.u0[2 * n:].reshape(ns, n)
        s = 10.0 * np.arange(1, ns + 1)
        np.testing.assert_allclose(eta, s[:, None] * vel[None, :], rtol=1e-14)

    def test_reflection_symmetry(self):
        n = 8
        x = nodes(n)
        p = memory(n, 4, feedback=[fb(list(range(4))), fb(list(range(4, 8)))],
                   u0=np.sin(math.pi * x), u1=x * (1 - x), f_kind="sine", f_scale=0.1, certificate=(2.0, 0.0))
        sys_ = build_wave_memory(p)
        traj = picard_solve(sys_, 4.0, 0.01, tol=1e-12).trajectory
        blocks = traj.states.reshape(len(traj), -1, n)
        np.testing.assert_allclose(blocks, blocks[:, :, ::-1], atol=1e-12)


class TestPlate:
    def test_dissipative(self):
        assert dissipativity_check(build_plate(memory(8, 6)).generator, seed=0) <= 1e-10

    def test_no_memory_block_is_skew(self):
        n = 8
        sys_ = build_plate(memory(n, 4, mu0=1e-8))
        assert abs(dissipativity_check(uv_block(sys_, n))) <= 1e-10

    def test_needs_five_nodes(self):
        with pytest.raises(ConfigurationError):
            build_plate(memory(4, 2))

    def test_reflection_symmetry(self):
        n = 7
        x = nodes(n)
        p = memory(n, 3, u0=(x * (1 - x)) ** 2, certificate=(2.0, 0.0))
        traj = picard_solve(build_plate(p), 1.0, 1e-3, tol=1e-12).trajectory
        blocks = traj.states.reshape(len(traj), -1, n)
        np.testing.assert_allclose(blocks, blocks[:, :, ::-1], atol=1e-12)


class TestNonlinearities:
    def test_zero(self):
        f = nonlinearity_catalog("zero", dim=3)
        assert f.lipschitz == 0.0 and np.all(f(np.ones(3)) == 0)
        f.check(StateSpace.euclidean(3))

    def test_sine_lipschitz(self, rng):
        f = nonlinearity_catalog("sine", 0.3, dim=4)
        assert f.lipschitz == pytest.approx(0.3)
        u, v = rng.standard_normal((2, 500, 4)) * 3
        assert np.all(np.linalg.norm(f(u) - f(v), axis=1) <= 0.3 * np.linalg.norm(u - v, axis=1) * (1 + 1e-12))

    def test_saturating_at_zero(self):
        f = nonlinearity_catalog("saturating", 0.5, dim=2)
        assert np.all(f(np.zeros(2)) == 0.0) and f.lipschitz == 1.0
        f.check(StateSpace.euclidean(2))

    def test_negative_scale(self):
        with pytest.raises(ConfigurationError):
            nonlinearity_catalog("sine", -1.0)

    def test_pde_constant_covers_h_norm(self):
        n = 10
        sys_ = build_wave_memory(memory(n, 3, f_kind="saturating", f_scale=0.4))
        sys_.nonlinearity.check(sys_.space, n_pairs=400, seed=7)
