"""
Main orchestrator module.

Manages the cascade pipeline:
1. Construct and certify the frequency family
2. Lay out the drive schedule
3. Simulate the chain, resonant, full and perturbation systems
4. Evaluate the bounds and write the growth report
"""

import math
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from halo import Halo

from toruscascade import __version__
from toruscascade.analysis import (
    GrowthReport,
    alpha_beta_estimates,
    check_certification,
    check_decay,
    check_fs_deviation,
    check_growth,
    check_induction,
    check_integrator,
    check_matrix_identity,
    check_move_table,
    check_perturbation,
    check_reduction,
    decay_table,
    fit_decay_constant,
    fit_growth_constant,
    gronwall_bound,
    growth_table,
    holdout_perturbation_fit,
    hs_norms_from_frame,
    k_of_t,
    largest_coefficient,
)
from toruscascade.artifacts import ArtifactStore
from toruscascade.config import RunConfig
from toruscascade.errors import VerificationError
from toruscascade.lattice import (
    FrequencyFamily,
    LatticeVec,
    certification_passed,
    construct_family,
    family_from_json,
    growth_constants,
    verify_properties,
)
from toruscascade.potential import PotentialSpec, potential_norm_series, realness_residue
from toruscascade.schedule import BetaMode, Schedule, build_schedule, log_cycle_boundaries
from toruscascade.spectral_sim import (
    RhsKind,
    SpectralProblem,
    SpectralState,
    cauchy_table,
    fs_deviation,
    long_frame,
    pert_residual,
    pert_solution,
)

REALNESS_GRID = 256
DETERMINISM_NOTE = "Random samples use fixed seeds; identical configuration gives identical files."


def _finite_or_none(values) -> List[Optional[float]]:
    return [float(v) if math.isfinite(v) else None for v in values]


class CascadeRunner:
    """Main orchestrator for the cascade pipeline."""

    def __init__(self, config: RunConfig, store: Optional[ArtifactStore] = None, verbose: bool = True):
        """
        Initialize the runner.

        Args:
            config: Validated run configuration
            store: Artifact store (defaults to config.out)
            verbose: Whether to print step banners and spinners
        """
        self.config = config
        self.verbose = verbose
        self.store = store or ArtifactStore(config.out, verbose=verbose)

    def _banner(self, step: int, title: str):
        if self.verbose:
            print("\n" + "=" * 80)
            print(f"STEP {step}: {title}")
            print("=" * 80 + "\n")

    def _spinner(self, text: str) -> Optional[Halo]:
        if not self.verbose:
            return None
        spinner = Halo(text=text, spinner="dots")
        spinner.start()
        return spinner

    def _stage(self, text: str, work, done):
        """Run work() under a spinner; done(result) gives the success text."""
        spinner = self._spinner(text)
        try:
            result = work()
        except Exception:
            if spinner:
                spinner.fail(f"✗ {text}")
            raise
        if spinner:
            spinner.succeed(f"✓ {done(result)}")
        return result

    # ------------------------------------------------------------------
    # Loading
    # ------------------------------------------------------------------

    def load_family(self) -> FrequencyFamily:
        return family_from_json(self.store.read_text("family.json"))

    def load_schedule(self) -> Schedule:
        return Schedule.from_dict(self.store.read_json("schedule.json"))

    def beta_mode(self) -> BetaMode:
        return BetaMode(self.config.beta_mode, self.config.beta_base, self.config.beta_ratio)

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def run_family(self) -> Dict:
        """
        Construct, certify and store the frequency family.

        Raises:
            VerificationError: If a property P1-P10 fails
        """
        cfg = self.config
        self._banner(1, "Constructing Frequency Family")
        family = self._stage(
            f"Searching multipliers for K = {cfg.K}...",
            lambda: construct_family(LatticeVec(*cfg.m0), cfg.K, cfg.search_constant),
            lambda f: f"Constructed {len(f.l)} steps, multipliers {f.a_choices}",
        )
        report = self._stage(
            "Checking P1-P10...",
            lambda: verify_properties(family),
            lambda r: "Certification " + ("passed" if certification_passed(r) else "FAILED"),
        )
        passed = certification_passed(report)
        self.store.write_text("family.json", family.to_json())
        self.store.write_json(
            "certification.json",
            {"properties": report, "passed": passed, "growth_constants": growth_constants(family)},
        )
        results = {"stage": "family", "success": passed, "K": family.K, "properties": report}
        if self.verbose:
            self._print_summary(results)
        if not passed:
            failed = [name for name, entry in report.items() if not entry["passed"]]
            raise VerificationError(f"Family certification failed for {failed}")
        return results

    def run_schedule(self) -> Dict:
        cfg = self.config
        family = self.load_family()
        self._banner(2, "Laying Out Drive Schedule")
        schedule = self._stage(
            f"Building {cfg.cycles} cycle(s) in {cfg.beta_mode} mode...",
            lambda: build_schedule(family, cfg.cycles, self.beta_mode()),
            lambda s: f"Horizon T_{s.cycles} = {s.horizon:.6g}",
        )
        data = schedule.to_dict()
        data["log_T_paper"] = _finite_or_none(log_cycle_boundaries(family, family.K))
        self.store.write_json("schedule.json", data)

        times = np.linspace(0.0, schedule.horizon, 401) if schedule.cycles else np.array([0.0])
        series = potential_norm_series(PotentialSpec(family, schedule), times, cfg.sobolev)
        self.store.write_csv("potential_norms.csv", series)

        results = {"stage": "schedule", "success": True, "T": schedule.T}
        if self.verbose:
            self._print_summary(results)
        return results

    def run_simulate(self) -> Dict:
        cfg = self.config
        family = self.load_family()
        schedule = self.load_schedule()
        problem = SpectralProblem(family, schedule, shell_depth=cfg.shell_depth)
        times = np.union1d(np.linspace(0.0, schedule.horizon, 201), schedule.T)
        meta: Dict = {
            "version": __version__,
            "config": cfg.to_dict(),
            "truncation": {"nodes": len(problem.trunc), "shell_depth": cfg.shell_depth},
            "determinism": DETERMINISM_NOTE,
        }

        self._banner(3, "Exact Chain and Resonant System")
        n_chain = len(problem.trunc.chain)
        reference = problem.chain_reference(times)
        self.store.write_csv(
            "chain_exact.csv", long_frame(problem.trunc.nodes[:n_chain], times, reference[:, :n_chain])
        )
        initial = SpectralState.from_chain(problem.trunc, problem.resonant.initial, 0.0)
        rfs = self._stage(
            f"Integrating RFS on {len(problem.trunc)} nodes...",
            lambda: problem.integrate(RhsKind.RFS, initial, schedule.horizon, tol=cfg.tol, sample_times=times),
            lambda tr: f"RFS done ({tr.nfev} evaluations)",
        )
        self.store.write_csv("rfs.csv", rfs.to_frame())
        at = {float(t): i for i, t in enumerate(rfs.times)}
        exact_at_T = problem.chain_reference(schedule.T[1:])
        errors = [
            float(np.max(np.abs(rfs.states[at[float(T)]] - exact)))
            for T, exact in zip(schedule.T[1:], exact_at_T)
        ]
        mass = rfs.mass()
        meta["rfs"] = {
            "errors_at_T": errors,
            "mass_drift": float(np.max(np.abs(mass - mass[0]))),
            "leakage": rfs.leakage_summary(),
        }

        if schedule.cycles == 0:
            # Nothing drives the system; the t = 0 state is the whole answer
            skipped = "cycles = 0, only the initial state is emitted"
            self.store.write_csv("fs.csv", rfs.to_frame())
            meta["fs"] = {"skipped": skipped, "threshold": cfg.deviation_threshold}
            meta["pert"] = {"skipped": skipped, "N": []}
        else:
            self._banner(4, "Full System Deviation")
            meta["fs"] = self._simulate_fs(family, schedule.cycles)

            self._banner(5, "Perturbation Solutions")
            meta["pert"] = self._simulate_pert(family)

        self.store.write_json("simulate_meta.json", meta)
        results = {"stage": "simulate", "success": True, "meta": meta}
        if self.verbose:
            self._print_summary(results)
        return results

    def _simulate_fs(self, family: FrequencyFamily, cycles: int) -> Dict:
        """Forward full system over the main cycles at beta_base and at half of it."""
        cfg = self.config
        frames, maxima, leakage = [], [], []
        for base in (cfg.beta_base, 0.5 * cfg.beta_base):
            schedule = build_schedule(family, cycles, BetaMode("scaled", base, cfg.beta_ratio))
            problem = SpectralProblem(family, schedule, shell_depth=cfg.shell_depth)
            traj, frame = self._stage(
                f"Integrating FS at beta base {base:g} over {cycles} cycle(s)...",
                lambda: fs_deviation(problem, tol=cfg.fs_tol),
                lambda result: f"FS at beta base {base:g}: max deviation {result[1]['deviation_l1'].max():.3e}",
            )
            if not frames:
                self.store.write_csv("fs.csv", traj.to_frame())
            frame.insert(0, "beta_base", base)
            frames.append(frame)
            maxima.append(float(frame["deviation_l1"].max()))
            leakage.append(traj.leakage_summary())
        self.store.write_csv("fs_deviation.csv", pd.concat(frames, ignore_index=True))
        return {
            "beta_base": cfg.beta_base,
            "cycles": cycles,
            "max_deviation": maxima[0],
            "max_deviation_half": maxima[1],
            "leakage": leakage[0],
            "threshold": cfg.deviation_threshold,
        }

    def _simulate_pert(self, family: FrequencyFamily) -> Dict:
        """
        Backward solutions c^N on a scaled schedule of max(pert_cycles) cycles.

        Each c^N is sampled at sample_count points on [0, T_N]. C is fitted on the
        samples in the first half of the time span and tested on the rest.
        """
        cfg = self.config
        N_list = sorted(set(cfg.pert_cycles))
        if not N_list:
            return {"N": [], "consecutive_distances": []}
        N_last = N_list[-1]
        schedule = build_schedule(family, N_last, BetaMode("scaled", cfg.pert_beta_base, cfg.beta_ratio))
        problem = SpectralProblem(family, schedule, shell_depth=cfg.shell_depth)
        at_zero, times, norms, ks, betas = {}, [], [], [], []
        for N in N_list:
            samples = np.linspace(0.0, schedule.T[N], cfg.sample_count + 1)
            traj = self._stage(
                f"Integrating c^{N} backward from T_{N} = {schedule.T[N]:.6g}...",
                lambda: pert_solution(problem, N, tol=cfg.fs_tol, sample_times=samples),
                lambda tr: f"c^{N} done ({tr.nfev} evaluations), |c^{N}(0)|_1 = {tr.l1()[0]:.3e}",
            )
            self.store.write_csv(f"pert_N{N}.csv", traj.to_frame())
            at_zero[N] = traj.states[0]
            for t, value in zip(traj.times, traj.l1()):
                k = k_of_t(schedule, float(t))
                times.append(float(t))
                norms.append(float(value))
                ks.append(k)
                betas.append(schedule.beta[k] if k < len(schedule.beta) else 0.0)

        table = cauchy_table(at_zero)
        consecutive = [
            float(table[(table["N"] == N) & (table["M"] == M)]["distance_l1"].iloc[0])
            for N, M in zip(N_list, N_list[1:])
        ]
        fit = holdout_perturbation_fit(times, norms, ks, betas)

        grid = np.linspace(0.0, schedule.T[N_last], 4 * cfg.sample_count + 1)
        estimates = alpha_beta_estimates(problem, grid, t_final=schedule.T[N_last])
        envelope = gronwall_bound(problem, estimates)
        last = pert_solution(problem, N_last, tol=cfg.fs_tol, sample_times=grid)
        residual = pert_residual(problem, N_last, grid[1:-1:4], tol=cfg.fs_tol)

        return {
            "N": N_list,
            "beta_base": cfg.pert_beta_base,
            "T": list(schedule.T),
            "consecutive_distances": consecutive,
            "norms_at_zero": [float(np.sum(np.abs(at_zero[N]))) for N in N_list],
            "fitted_C": fit.C,
            "held_out": fit.held_out,
            "log_excess": fit.log_excess,
            "alpha_over_beta_max": float(estimates["alpha_over_beta_k"].max()),
            "gronwall_ratio_max": float(np.max(last.l1() / np.maximum(envelope, 1e-300))),
            "residual_max": float(residual["residual"].max()) if len(residual) else 0.0,
        }

    def run_report(self) -> Dict:
        """
        Evaluate every acceptance criterion and write the report.

        Raises:
            VerificationError: If any criterion fails (the report is written first)
        """
        cfg = self.config
        family = self.load_family()
        schedule = self.load_schedule()
        meta = self.store.read_json("simulate_meta.json")
        chain_frame = self.store.read_csv("chain_exact.csv")
        fs_frame = self.store.read_csv("fs.csv")
        inputs = ["family.json", "schedule.json", "simulate_meta.json", "chain_exact.csv", "rfs.csv", "fs.csv"]
        checksums = {name: self.store.checksum(name) for name in inputs}

        self._banner(6, "Evaluating Acceptance Criteria")
        spec = PotentialSpec(family, schedule)
        realness = 0.0
        for seg in schedule.segments:
            if 4 * family.l[seg.drive_index].norm() <= REALNESS_GRID:
                realness = max(realness, realness_residue(spec, 0.5 * (seg.t_start + seg.t_end), REALNESS_GRID))

        checks = [
            check_move_table,
            check_matrix_identity,
            lambda: check_certification(family),
            lambda: check_reduction(family),
            lambda: check_induction(family),
            lambda: check_integrator(meta, cfg.tol),
            lambda: check_growth(family),
            lambda: check_fs_deviation(meta, cfg.deviation_threshold),
            lambda: check_perturbation(meta),
            lambda: check_decay(family, realness),
        ]
        criteria = [
            self._stage(f"Criterion {i}...", check, lambda c: f"{c.number}. {c.name}: {c.status()}")
            for i, check in enumerate(checks, start=1)
        ]

        constants = dict(growth_constants(family))
        constants["log_c_growth_s1_d0.5"] = fit_growth_constant(constants, 1.0, 0.5, family.K)
        if family.K >= 3:
            constants["log_C_decay_s1_m0_d0.5"] = fit_decay_constant(family, 1.0, 0, 0.5)
        constants["C_perturbation"] = float(meta.get("pert", {}).get("fitted_C", math.nan))
        constants["min_largest_chain_coefficient"] = float(largest_coefficient(chain_frame).min())

        s_values = sorted({s for s, _ in cfg.sobolev})
        times = sorted(float(t) for t in chain_frame["t"].unique())
        report = GrowthReport(
            times=times,
            hs_exact={f"s{s:g}": hs_norms_from_frame(chain_frame, s).tolist() for s in s_values},
            hs_fs={f"s{s:g}": hs_norms_from_frame(fs_frame, s).tolist() for s in s_values},
            T=list(schedule.T),
            m_norms=[family.node(n).norm() for n in range(family.K + 2)],
            constants=constants,
            criteria=criteria,
            checksums=checksums,
        )
        self.store.write_text("report.json", report.to_json())
        self.store.write_text("report.txt", report.render_text())

        bounds = [growth_table(family, 1.0, 0.5, 10).assign(kind="growth")]
        if family.K >= 3:
            bounds.append(decay_table(family, 0.5, cfg.sobolev).assign(kind="decay"))
        self.store.write_csv("bounds.csv", pd.concat(bounds, ignore_index=True))

        results = {"stage": "report", "success": report.passed, "criteria": criteria}
        if self.verbose:
            self._print_summary(results)
        if not report.passed:
            failed = [c.number for c in criteria if not c.passed]
            raise VerificationError(f"Criteria {failed} failed; see {self.store.path('report.txt')}")
        return results

    def _print_summary(self, results: Dict):
        print("\n" + "=" * 80)
        print(f"{results['stage'].upper()} SUMMARY")
        print("=" * 80 + "\n")

        for criterion in results.get("criteria", []):
            print(f"{criterion.number:>2}. {criterion.name:<28} {'✓ PASS' if criterion.passed else '✗ FAIL'}")
        if "T" in results:
            print("Cycle boundaries: " + ", ".join(f"{t:.6g}" for t in results["T"]))
        if "meta" in results:
            meta = results["meta"]
            print(f"Truncation nodes: {meta['truncation']['nodes']}")
            print(f"RFS max error at T_n: {max(meta['rfs']['errors_at_T'], default=0.0):.3e}")
            if "max_deviation" in meta["fs"]:
                print(f"FS max deviation: {meta['fs']['max_deviation']:.3e}")

        print(f"\nOverall result: {'✓ SUCCESS' if results['success'] else '✗ FAILURE'}")
        print("=" * 80 + "\n")
