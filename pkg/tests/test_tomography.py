import math

import numpy as np
import pytest

from catsim.channels import ExperimentParams, herald_subtract
from catsim.errors import (
    DomainError,
    IdentifiabilityWarning,
    NonConvergenceWarning,
)
from catsim.fock import (
    HilbertConfig,
    SqueezeSpec,
    StateVector,
    fidelity,
    squeezed_vacuum,
    trace_distance,
)
from catsim.phasespace import marginal, origin_parity
from catsim.sampler import HomodyneDataset, PhasePlan, synth_dataset
from catsim.tomography import (
    BootstrapReport,
    MleConfig,
    bootstrap,
    log_likelihood,
    mle_reconstruct,
    povm_projector,
)

CFG30 = HilbertConfig(30)


def vacuum_dm():
    amps = np.zeros(CFG30.dim)
    amps[0] = 1.0
    return StateVector(amps, CFG30).to_density()


@pytest.fixture(scope="module")
def herald2_state():
    return herald_subtract(ExperimentParams().with_herald(2)).state


@pytest.fixture(scope="module")
def herald2_dataset(herald2_state):
    return synth_dataset(herald2_state, PhasePlan(), seed=7411, source_id="herald_2")


@pytest.fixture(scope="module")
def herald2_recon(herald2_dataset):
    return mle_reconstruct(herald2_dataset, MleConfig(cutoff=15, bin_width=0.05))


# ---------------------------------------------------------------- projectors


def test_povm_projector_reference_elements():
    pi = povm_projector(0.0, 0.0, 12)
    assert pi[0, 0].real == pytest.approx(1 / math.sqrt(math.pi), abs=1e-12)
    assert abs(pi[1, 1]) < 1e-28


def test_povm_projector_trace_matches_direct_sum():
    from catsim.fock import quadrature_wavefunction

    for theta, q in ((0.0, 0.3), (37.0, -1.2), (90.0, 2.0)):
        pi = povm_projector(theta, q, 20)
        direct = sum(
            abs(quadrature_wavefunction(n, q, math.radians(theta))) ** 2 for n in range(21)
        )
        assert np.trace(pi).real == pytest.approx(direct, abs=1e-12)


def test_povm_projector_is_rank_one_psd():
    pi = povm_projector(22.5, 0.7, 10)
    assert np.max(np.abs(pi - pi.conj().T)) < 1e-14
    vals = np.linalg.eigvalsh(pi)
    assert np.all(vals >= -1e-14)
    assert np.sum(vals > 1e-12) == 1


# ---------------------------------------------------------------- likelihood


def test_log_likelihood_single_record_maximally_mixed():
    dim = 9
    mixed = np.eye(dim, dtype=complex) / dim
    from catsim.fock import DensityMatrix

    rho = DensityMatrix(mixed, HilbertConfig(dim - 1))
    ds = HomodyneDataset(np.array([30.0]), np.array([0.4]))
    pi = povm_projector(30.0, 0.4, dim - 1)
    want = math.log(np.trace(pi).real / dim)
    assert log_likelihood(rho, ds) == pytest.approx(want, abs=1e-12)


def test_log_likelihood_reorder_invariance():
    rho = squeezed_vacuum(SqueezeSpec(0.4), CFG30).to_density()
    ds = synth_dataset(rho, PhasePlan(samples_per_phase=500), seed=8)
    perm = np.random.default_rng(0).permutation(len(ds))
    shuffled = HomodyneDataset(ds.theta_deg[perm], ds.q[perm], dict(ds.meta))
    del shuffled.meta["counts_per_phase"]  # counts no longer contiguous, still valid
    assert log_likelihood(rho, ds) == pytest.approx(log_likelihood(rho, shuffled), rel=1e-12)


def test_true_state_beats_vacuum_on_squeezed_data():
    rho = squeezed_vacuum(SqueezeSpec(0.576), CFG30).to_density()
    ds = synth_dataset(rho, PhasePlan(samples_per_phase=1667), seed=10)
    assert log_likelihood(rho, ds) > log_likelihood(vacuum_dm(), ds)


# ---------------------------------------------------------------- reconstruction


def test_vacuum_closed_loop():
    ds = synth_dataset(vacuum_dm(), PhasePlan(), seed=13, source_id="vac")
    rho_hat, diag = mle_reconstruct(ds, MleConfig(cutoff=12, bin_width=0.05))
    assert diag["converged"]
    assert fidelity(rho_hat.embed(30), vacuum_dm()) > 0.999


def test_herald2_closed_loop(herald2_state, herald2_recon):
    rho_hat, diag = herald2_recon
    assert fidelity(rho_hat.embed(30), herald2_state) >= 0.99
    assert diag["converged"]
    assert np.sign(origin_parity(rho_hat)) == np.sign(origin_parity(herald2_state))


def test_likelihood_monotone(herald2_recon):
    _, diag = herald2_recon
    assert diag["monotone"]
    hist = np.asarray(diag["log_likelihood_history"])
    drops = hist[:-1] - hist[1:]
    assert np.all(drops <= 1e-9 * np.maximum(1.0, np.abs(hist[:-1])))


def test_single_phase_identifiability_warning():
    rho = squeezed_vacuum(SqueezeSpec(0.3), CFG30).to_density()
    ds = synth_dataset(rho, PhasePlan(phases_deg=(0.0,), samples_per_phase=2000), seed=2)
    with pytest.warns(IdentifiabilityWarning):
        _, diag = mle_reconstruct(ds, MleConfig(cutoff=8, bin_width=0.05))
    assert any("single phase" in w for w in diag["warnings"])


def test_fixed_point_large_sample_proxy():
    truth = herald_subtract(ExperimentParams().with_herald(1)).state
    ds = synth_dataset(truth, PhasePlan(samples_per_phase=20_000), seed=44, source_id="h1")
    rho_hat, _ = mle_reconstruct(ds, MleConfig(cutoff=10, bin_width=0.05))
    assert trace_distance(rho_hat.embed(30), truth) < 0.05


def test_reconstruction_marginals_pass_ks(herald2_dataset, herald2_recon):
    from scipy import stats

    rho_hat, _ = herald2_recon
    q = np.linspace(-8, 8, 8001)
    dq = q[1] - q[0]
    for theta in herald2_dataset.phases:
        pdf = np.clip(marginal(rho_hat, math.radians(theta), q), 0, None)
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * dq)))
        cdf /= cdf[-1]
        stat = stats.kstest(
            herald2_dataset.records_for(theta), lambda x: np.interp(x, q, cdf)
        ).statistic
        assert stat < 0.02


def test_mle_output_satisfies_state_invariants(herald2_recon):
    rho_hat, _ = herald2_recon
    elements = np.asarray(rho_hat.elements)
    assert np.max(np.abs(elements - elements.conj().T)) < 1e-12
    assert np.trace(elements).real == pytest.approx(1.0, abs=1e-10)
    assert np.linalg.eigvalsh(elements)[0] > -1e-9


def test_nonconvergence_warning_and_best_iterate():
    rho = squeezed_vacuum(SqueezeSpec(0.4), CFG30).to_density()
    ds = synth_dataset(rho, PhasePlan(samples_per_phase=2000), seed=3)
    with pytest.warns(NonConvergenceWarning):
        rho_hat, diag = mle_reconstruct(
            ds, MleConfig(cutoff=10, max_iterations=5, bin_width=0.05)
        )
    assert not diag["converged"]
    assert diag["iterations"] == 5
    assert np.trace(rho_hat.elements).real == pytest.approx(1.0, abs=1e-10)


def test_empty_dataset_rejected():
    with pytest.raises(DomainError):
        mle_reconstruct(HomodyneDataset(np.array([]), np.array([])), MleConfig(cutoff=5))


def test_shot_noise_rescaling():
    # the same records expressed at vacuum variance 1 reconstruct the same state
    rho = squeezed_vacuum(SqueezeSpec(0.5), CFG30).to_density()
    ds = synth_dataset(rho, PhasePlan(samples_per_phase=4000), seed=6)
    scaled = HomodyneDataset(
        ds.theta_deg,
        ds.q * math.sqrt(2.0),
        {"shot_noise_variance": 1.0},
    )
    a, _ = mle_reconstruct(ds, MleConfig(cutoff=10, bin_width=0.05))
    b, _ = mle_reconstruct(scaled, MleConfig(cutoff=10, bin_width=0.05))
    assert fidelity(a, b) > 1 - 1e-6


# ---------------------------------------------------------------- bootstrap


def test_bootstrap_smoke_tiny():
    ds = synth_dataset(vacuum_dm(), PhasePlan(samples_per_phase=200), seed=5, source_id="tiny")
    rep = bootstrap(ds, MleConfig(cutoff=6, bin_width=0.1), replicas=2, seed=1, workers=1)
    assert isinstance(rep, BootstrapReport)
    assert rep.successful == 2
    assert np.isfinite(rep.mean_photon[1]) and rep.mean_photon[1] >= 0.0
    assert rep.diagonal_std.shape == (7,)


def test_bootstrap_vacuum_sigma():
    ds = synth_dataset(vacuum_dm(), PhasePlan(), seed=19, source_id="vac")
    cfg = MleConfig(cutoff=8, bin_width=0.05, log_likelihood_tolerance=1e-9)
    rep = bootstrap(ds, cfg, replicas=100, seed=77, workers=2)
    assert rep.successful == 100
    assert rep.mean_photon[1] < 0.01


def test_bootstrap_determinism_across_worker_counts():
    ds = synth_dataset(vacuum_dm(), PhasePlan(samples_per_phase=300), seed=23)
    cfg = MleConfig(cutoff=5, bin_width=0.1)
    serial = bootstrap(ds, cfg, replicas=6, seed=9, workers=1)
    parallel = bootstrap(ds, cfg, replicas=6, seed=9, workers=2)
    assert serial.mean_photon == parallel.mean_photon
    assert serial.origin_wigner == parallel.origin_wigner
    assert np.array_equal(serial.diagonal_mean, parallel.diagonal_mean)


def test_bootstrap_rejects_too_few_replicas():
    ds = synth_dataset(vacuum_dm(), PhasePlan(samples_per_phase=100), seed=1)
    with pytest.raises(DomainError):
        bootstrap(ds, MleConfig(cutoff=5), replicas=1, seed=0)


def test_bootstrap_report_serializes():
    ds = synth_dataset(vacuum_dm(), PhasePlan(samples_per_phase=200), seed=5)
    rep = bootstrap(ds, MleConfig(cutoff=5, bin_width=0.1), replicas=3, seed=4, workers=1)
    payload = rep.to_dict()
    assert payload["replicas"] == 3
    assert set(payload["mean_photon"]) == {"mean", "std"}
