"""
Experiment strategies behind the `run` command.

Each strategy turns a validated run configuration into result tables and
documents; ExperimentRunner writes them next to a RunManifest. Work items are
mapped in a fixed order so the output does not depend on the thread count.
"""

import logging
import os
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd

from src import cdefinetti, gibbs, hartree, localization, loggas
from src.exceptions import ConfigError, InvariantViolation
from src.manifest import RunManifest
from src.qdefinetti import definetti_gap, product_state_distance
from src.result_io import write_result
from src.run_config import (
    BaseRunConfig,
    DefinettiGapConfig,
    DFClassicalConfig,
    GibbsSweepConfig,
    HartreeSweepConfig,
    LocalizeCheckConfig,
    LogGasRunConfig,
)
from src.settings import DEFAULT_TOLERANCES
from src.sphere import sample_sphere
from src.states import random_density
from src.symspace import get_sector, sector_dimension

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


def instance_seed(*keys: int) -> int:
    """Deterministic 32-bit seed derived from integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def ordered_map(fn: Callable, items: Iterable, threads: int) -> list:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        return list(executor.map(fn, list(items)))


@dataclass
class ExperimentResult:
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    documents: Dict[str, dict] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)
    violations: int = 0


# Abstract Base Class for Experiments
class ExperimentStrategy(ABC):
    @abstractmethod
    def run(self, config: BaseRunConfig, threads: int) -> ExperimentResult:
        """
        Runs the experiment.

        Parameters:
        config (BaseRunConfig): Validated configuration of the command.
        threads (int): Worker threads.

        Returns:
        ExperimentResult: Tables, documents, summary metrics and the violation count.
        """
        pass


def _problem(config) -> hartree.HartreeProblem:
    if config.problem == "diagonal":
        if config.d != 2:
            raise ConfigError("Invalid configuration field 'd': the diagonal problem has d = 2.")
        return hartree.diagonal_problem(config.g)
    if config.problem == "free":
        return hartree.free_problem(config.d)
    return hartree.random_problem(config.seed, config.d)


# ---------------------------------------------------------------------------
# Concrete experiments
# ---------------------------------------------------------------------------
class DefinettiGapExperiment(ExperimentStrategy):
    """Trace distance of CKMR reconstructions on random states."""

    def run(self, config: DefinettiGapConfig, threads: int) -> ExperimentResult:
        instances = [(d, N, s) for d in config.d for N in config.N for s in config.seeds]
        for d, N, _ in instances:
            sector_dimension(d, N)

        def evaluate(instance: Tuple[int, int, int]) -> List[dict]:
            d, N, s = instance
            sector = get_sector(d, N)
            rank = config.rank if config.rank is not None else 1 + s % sector.dimension
            gamma = random_density(instance_seed(config.seed, d, N, s), sector, min(rank, sector.dimension))
            rows = []
            for n in config.n:
                if n > N:
                    continue
                gap = definetti_gap(gamma, n, strict=False)
                rows.append(
                    {
                        "d": d,
                        "N": N,
                        "n": n,
                        "seed": s,
                        "distance": gap.distance,
                        "bound_4_1": gap.bound_4_1,
                        "bound_sharp": gap.bound_sharp,
                        "violated": gap.violated,
                    }
                )
            return rows

        rows = [row for block in ordered_map(evaluate, instances, threads) for row in block]
        columns = ["d", "N", "n", "seed", "distance", "bound_4_1", "bound_sharp", "violated"]
        frame = pd.DataFrame.from_records(rows, columns=columns)
        violations = int(frame["violated"].sum()) if len(frame) else 0
        exact = [
            {"d": d, "N": N, "n": n, "product_distance": product_state_distance(d, N, n)}
            for d in config.d
            for N in config.N
            for n in config.n
            if n <= N
        ]
        logging.info(f"de Finetti gap: {len(frame)} rows, {violations} violations.")
        if config.strict and violations:
            raise InvariantViolation(f"de Finetti bound violated in {violations} rows.")
        max_ratio = float((frame["distance"] / frame["bound_4_1"]).max()) if len(frame) else 0.0
        return ExperimentResult(
            tables={"definetti-gap.csv": frame},
            documents={"product-distances.json": {"rows": exact}},
            metrics={"rows": float(len(frame)), "max_distance_over_bound": max_ratio},
            violations=violations,
        )


class DFClassicalExperiment(ExperimentStrategy):
    """Diaconis-Freedman distance and marginal identities on random symmetric tables."""

    def run(self, config: DFClassicalConfig, threads: int) -> ExperimentResult:
        instances = [(K, N, s) for K in config.K for N in config.N for s in config.seeds]
        for K, N, _ in instances:
            cdefinetti._check_table_size(K, N)

        def evaluate(instance: Tuple[int, int, int]):
            K, N, s = instance
            mu = cdefinetti.df_random_measure(instance_seed(config.seed, K, N, s), K, N, config.concentration)
            mixed = cdefinetti.df_state(mu)
            orders = config.n if config.n is not None else range(1, N + 1)
            rows = []
            for n in orders:
                if n > N:
                    continue
                tv = cdefinetti.tv_distance(cdefinetti.marginal(mu, n), cdefinetti.marginal(mixed, n))
                rows.append(
                    {
                        "K": K,
                        "N": N,
                        "n": n,
                        "seed": s,
                        "tv": tv,
                        "bound": cdefinetti.df_bound(n, N),
                        "refined_bound": cdefinetti.df_refined_bound(K, n, N),
                    }
                )
            identities = None
            if N >= 2:
                report = cdefinetti.df_marginal_identities(mu)
                identities = {
                    "K": K,
                    "N": N,
                    "seed": s,
                    "first_residual": report.first_residual,
                    "second_residual": report.second_residual,
                    "min_residual_measure": report.min_residual_measure,
                    "passed": report.passed,
                }
            return rows, identities

        results = ordered_map(evaluate, instances, threads)
        rows = [row for block, _ in results for row in block]
        identities = [report for _, report in results if report is not None]
        frame = pd.DataFrame.from_records(rows, columns=["K", "N", "n", "seed", "tv", "bound", "refined_bound"])
        slack = DEFAULT_TOLERANCES.bound_slack
        bound_failures = int((frame["tv"] > frame["bound"] + slack).sum()) if len(frame) else 0
        refined_failures = int((frame["tv"] > frame["refined_bound"] + slack).sum()) if len(frame) else 0
        identity_failures = sum(1 for report in identities if not report["passed"])
        violations = bound_failures + refined_failures + identity_failures
        logging.info(f"Diaconis-Freedman: {len(frame)} rows, {bound_failures} bound, {refined_failures} refined-bound and {identity_failures} identity failures.")
        return ExperimentResult(
            tables={"df-classical.csv": frame},
            documents={"df-identities.json": {"instances": identities}},
            metrics={"rows": float(len(frame)), "bound_failures": float(bound_failures), "refined_failures": float(refined_failures)},
            violations=violations,
        )


class HartreeSweepExperiment(ExperimentStrategy):
    def run(self, config: HartreeSweepConfig, threads: int) -> ExperimentResult:
        problem = _problem(config)
        options = {"restarts": config.restarts, "max_iter": config.max_iter, "grad_tol": config.grad_tol, "seed": config.seed, "threads": threads}
        sweep = hartree.convergence_sweep(problem, config.N, threads=threads, strict=False, minimize_options=options)
        summary = {
            "problem": problem.to_json(),
            "e_H": sweep.e_H,
            "fit_C": sweep.fit_C,
            "fit_residual": sweep.fit_residual,
            "gapN_ratio": sweep.gapN_ratio,
            "upper_bound_violations": sweep.upper_bound_violations,
            "monotonicity_violations": sweep.monotonicity_violations,
        }
        return ExperimentResult(
            tables={"hartree-sweep.csv": sweep.rows},
            documents={"hartree-sweep.json": summary},
            metrics={"e_H": sweep.e_H, "fit_C": sweep.fit_C, "gapN_ratio": sweep.gapN_ratio},
            violations=sweep.violations,
        )


class GibbsSweepExperiment(ExperimentStrategy):
    # Berezin-Lieb checks only below this sector dimension
    BEREZIN_LIEB_DIMENSION = 200

    def run(self, config: GibbsSweepConfig, threads: int) -> ExperimentResult:
        problem = _problem(config)
        sweep = gibbs.gap_sweep(problem, config.t, config.N, samples=config.samples, seed=config.seed, threads=threads)
        largest = max(config.N)
        spectrum = gibbs.quantum_gibbs(problem, largest, config.t * largest).spectrum_frame()

        def check(N: int) -> dict:
            state = gibbs.quantum_gibbs(problem, N, config.t * N)
            report = gibbs.berezin_lieb_check(state)
            return {"N": N, "lhs": report.lhs, "rhs": report.rhs, "slack": report.slack, "error": report.error, "passed": report.passed}

        checked = [N for N in sorted(set(config.N)) if problem.d <= 3 and sector_dimension(problem.d, N) <= self.BEREZIN_LIEB_DIMENSION]
        reports = ordered_map(check, checked, threads)
        failures = sum(1 for report in reports if not report["passed"])
        summary = {
            "problem": problem.to_json(),
            "t": config.t,
            "seed": config.seed,
            "samples": config.samples,
            "tail_max_gap": sweep.tail_max_gap,
            "fit_C": sweep.fit_C,
            "fit_residual": sweep.fit_residual,
            "rdm_distances": sweep.rdm_distances,
            "berezin_lieb": reports,
            "violations": sweep.violations,
        }
        return ExperimentResult(
            tables={"gibbs-sweep.csv": sweep.rows, "gibbs-spectrum.csv": spectrum},
            documents={"gibbs-sweep.json": summary},
            metrics={"tail_max_gap": sweep.tail_max_gap, "fit_C": sweep.fit_C},
            violations=sweep.violations + failures,
        )


class LocalizeCheckExperiment(ExperimentStrategy):
    """Duality, consistency and binomial-mass checks on random (state, projector) pairs."""

    def run(self, config: LocalizeCheckConfig, threads: int) -> ExperimentResult:
        instances = [(d, N, i) for d in config.d for N in config.N for i in range(config.instances)]
        for d, N, _ in instances:
            sector_dimension(d, N)

        def evaluate(instance: Tuple[int, int, int]) -> dict:
            d, N, i = instance
            sector = get_sector(d, N)
            rank = config.rank if config.rank is not None else 1 + i % sector.dimension
            gamma = random_density(instance_seed(config.seed, d, N, i, 0), sector, min(rank, sector.dimension))
            P = localization.random_projector(instance_seed(config.seed, d, N, i, 1), d)
            rng = np.random.default_rng(instance_seed(config.seed, d, N, i, 2))
            u = sample_sphere(rng, d, 1)[0]
            consistency = max(localization.check_consistency(gamma, P, n, strict=False) for n in range(1, N + 1))
            return {
                "d": d,
                "N": N,
                "instance": i,
                "rank_P": P.rank,
                "duality": localization.check_duality(gamma, P, strict=False),
                "consistency": consistency,
                "binomial": localization.binomial_mass_residual(u, P, N),
                "uniqueness": localization.localization_uniqueness_check(gamma, P),
            }

        frame = pd.DataFrame.from_records(
            ordered_map(evaluate, instances, threads),
            columns=["d", "N", "instance", "rank_P", "duality", "consistency", "binomial", "uniqueness"],
        )
        if len(frame):
            failed = (frame["duality"] >= 1e-12) | (frame["consistency"] >= 1e-10) | (frame["binomial"] >= 1e-10)
            violations = int(failed.sum())
        else:
            violations = 0
        logging.info(f"Localization checks: {len(frame)} instances, {violations} failures.")
        return ExperimentResult(
            tables={"localize-check.csv": frame},
            metrics={"max_duality": float(frame["duality"].max()) if len(frame) else 0.0, "max_consistency": float(frame["consistency"].max()) if len(frame) else 0.0},
            violations=violations,
        )


class LogGasExperiment(ExperimentStrategy):
    """Metropolis chains per N with error bars, the mean-field density and optional free energies."""

    def run(self, config: LogGasRunConfig, threads: int) -> ExperimentResult:
        if config.beta_grid is not None and config.alpha > 0 and config.interaction:
            raise ConfigError(f"Invalid configuration field 'beta_grid': free energies need alpha = 0, got alpha={config.alpha}.")

        def gas(N: int, beta: float = config.beta) -> loggas.LogGasConfig:
            return loggas.LogGasConfig(
                N=N,
                beta=beta,
                strength=config.strength,
                power=config.power,
                alpha=config.alpha,
                interaction=config.interaction,
                grid=config.grid,
                box_radius=config.box_radius,
                burn_in=config.burn_in,
            )

        N_values = sorted(set(config.N))
        mean_field = loggas.mf_minimize(gas(max(N_values)))
        jobs = [(N, c) for N in N_values for c in range(config.chains)]
        runs = ordered_map(lambda job: loggas.metropolis_sample(gas(job[0]), config.steps, instance_seed(config.seed, job[0], job[1])), jobs, threads)
        by_N: Dict[int, List[loggas.MetropolisRun]] = {}
        for (N, _), run in zip(jobs, runs):
            by_N.setdefault(N, []).append(run)

        series = []
        rows = []
        for N in N_values:
            chains = by_N[N]
            for c, run in enumerate(chains):
                frame = run.time_series()[["sweep", "energy", "mean_r2"]]
                frame.insert(0, "chain", c)
                frame.insert(0, "N", N)
                series.append(frame)
            energies = np.concatenate([run.energies for run in chains])
            radii2 = np.concatenate([run.mean_square_radius() for run in chains])
            energy, energy_err = loggas.batch_means(energies)
            r2, r2_err = loggas.batch_means(radii2)
            w1, w1_err = loggas.radial_wasserstein_with_error(chains, mean_field.density) if config.interaction else (np.nan, np.nan)
            rows.append(
                {
                    "N": N,
                    "beta": config.beta,
                    "acceptance": float(np.mean([run.acceptance for run in chains])),
                    "flagged": any(run.flagged for run in chains),
                    "energy_per_particle": energy / N,
                    "energy_err": energy_err / N,
                    "mean_r2": r2,
                    "mean_r2_err": r2_err,
                    "w1": w1,
                    "w1_err": w1_err,
                    "rhat": loggas.gelman_rubin([run.energies for run in chains]) if len(chains) > 1 else np.nan,
                }
            )
        summary_table = pd.DataFrame.from_records(rows)
        # reported only; Monte Carlo noise does not fail the run
        trend = loggas.wasserstein_trend(summary_table)

        free_energies = []
        if config.beta_grid is not None:
            for N in N_values:
                estimate = loggas.free_energy_estimate(gas(N), config.beta_grid, config.steps, instance_seed(config.seed, N, 7919), threads=threads)
                free_energies.append({"N": N, "F": estimate.free_energy, "F_err": estimate.error, "f": estimate.per_particle})
        document = {
            "config": config.to_dict(),
            "e_MF": mean_field.e_MF,
            "mf_converged": mean_field.converged,
            "support_radius": gas(1).support_radius,
            "chains": [
                {"N": N, "chain": c, "seed": run.seed, "acceptance": run.acceptance, "step_size": run.step_size, "flagged": run.flagged}
                for (N, c), run in zip(jobs, runs)
            ],
            "free_energies": free_energies,
            "w1_monotone": trend["monotone"],
            "w1_increases": trend["increases"],
        }
        if free_energies and len(free_energies) >= 2:
            document["brackets"] = loggas.fit_brackets([row["N"] for row in free_energies], [row["f"] for row in free_energies], mean_field.e_MF)
        if config.power == 2.0 and 2 in N_values:
            closed, numeric = loggas.two_particle_log_z(config.beta, config.strength)
            document["two_particle_log_z"] = {"closed_form": closed, "quadrature": numeric}
        return ExperimentResult(
            tables={"loggas-timeseries.csv": pd.concat(series, ignore_index=True), "loggas.csv": summary_table},
            documents={"loggas-summary.json": document},
            metrics={"e_MF": mean_field.e_MF, "min_acceptance": float(summary_table["acceptance"].min())},
            violations=0,
        )


class ExperimentFactory:
    EXPERIMENTS = {
        "definetti-gap": DefinettiGapExperiment,
        "df-classical": DFClassicalExperiment,
        "hartree-sweep": HartreeSweepExperiment,
        "gibbs-sweep": GibbsSweepExperiment,
        "localize-check": LocalizeCheckExperiment,
        "loggas": LogGasExperiment,
    }

    @staticmethod
    def get_experiment(command: str) -> ExperimentStrategy:
        if command not in ExperimentFactory.EXPERIMENTS:
            logging.error(f"Unknown command: {command}")
            raise ConfigError(f"Unknown command '{command}'. Available: {sorted(ExperimentFactory.EXPERIMENTS)}")
        return ExperimentFactory.EXPERIMENTS[command]()


class ExperimentRunner:
    """Runs one experiment strategy and writes its outputs with a manifest."""

    def __init__(self, strategy: ExperimentStrategy):
        self._strategy = strategy

    def set_strategy(self, strategy: ExperimentStrategy):
        logging.info("Switching experiment strategy.")
        self._strategy = strategy

    def execute(self, command: str, config: BaseRunConfig, out_dir: str) -> Tuple[RunManifest, ExperimentResult]:
        os.makedirs(out_dir, exist_ok=True)
        manifest = RunManifest(command=command, config=config.to_dict(), seed=config.seed)
        threads = config.resolved_threads()
        logging.info(f"Running {command} with {threads} threads into {out_dir}.")
        result = self._strategy.run(config, threads)
        written = []
        for name, table in result.tables.items():
            written.append(write_result(table, os.path.join(out_dir, name)))
        for name, document in result.documents.items():
            written.append(write_result(document, os.path.join(out_dir, name)))
        manifest.violations = result.violations
        manifest.finish(out_dir, written)
        if result.violations:
            logging.warning(f"{command} reported {result.violations} violations.")
        return manifest, result


def run_experiment(command: str, config: BaseRunConfig, out_dir: str) -> Tuple[RunManifest, ExperimentResult]:
    return ExperimentRunner(ExperimentFactory.get_experiment(command)).execute(command, config, out_dir)
