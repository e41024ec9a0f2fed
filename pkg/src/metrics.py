"""
Prometheus metrics for PCRPO training runs.

Each run owns its own CollectorRegistry so concurrent runs in a sweep never
share counters. The harness dumps the registry next to the run's CSV.
"""

import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, Info, generate_latest, write_to_textfile


class RunMetrics:
    """Metric set for one training run."""

    def __init__(self, algorithm: str) -> None:
        self.algorithm = algorithm
        self.registry = CollectorRegistry()

        # =====================================================================
        # METRICS DEFINITIONS
        # =====================================================================

        self.iterations_total = Counter(
            "pcrpo_iterations_total",
            "Training iterations by update mode",
            ["algorithm", "mode"],
            registry=self.registry,
        )
        self.kl_halvings = Histogram(
            "pcrpo_kl_halvings",
            "Step halvings needed to satisfy the KL threshold",
            buckets=(0, 1, 2, 4, 8, 16, 20),
            registry=self.registry,
        )
        self.kl_stalls_total = Counter(
            "pcrpo_kl_stalls_total",
            "Iterations that exhausted the halving budget and took a zero step",
            registry=self.registry,
        )
        self.reward_value = Gauge(
            "pcrpo_reward_value",
            "Latest estimated reward value V_r(rho)",
            registry=self.registry,
        )
        self.cost_value = Gauge(
            "pcrpo_cost_value",
            "Latest estimated cost value V_c(rho) per channel",
            ["channel"],
            registry=self.registry,
        )
        self.iteration_seconds = Histogram(
            "pcrpo_iteration_seconds",
            "Wall time per training iteration in seconds",
            registry=self.registry,
        )
        self.run_info = Info(
            "pcrpo_run",
            "Training run metadata",
            registry=self.registry,
        )

    def record_iteration(
        self,
        mode: str,
        v_r: float,
        v_c: tuple[float, ...],
        halvings: int,
        stalled: bool,
    ) -> None:
        self.iterations_total.labels(algorithm=self.algorithm, mode=mode).inc()
        self.kl_halvings.observe(halvings)
        if stalled:
            self.kl_stalls_total.inc()
        self.reward_value.set(v_r)
        for i, value in enumerate(v_c):
            self.cost_value.labels(channel=f"cost_{i}").set(value)

    @contextmanager
    def time_iteration(self) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.iteration_seconds.observe(time.perf_counter() - start)

    def exposition(self) -> bytes:
        """Metrics in text exposition format."""
        return generate_latest(self.registry)

    def write(self, path: Path) -> None:
        write_to_textfile(str(path), self.registry)
