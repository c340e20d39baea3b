"""Pydantic models for every configuration type: state spaces, potentials, flows, runs"""
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    model_validator,
)


class SpaceSpec(BaseModel):
    """Euclidean space of m particles in n dims, or the flat torus of circumference ell"""

    model_config = ConfigDict(frozen=True)

    kind: Literal["euclidean", "torus"] = "euclidean"
    m: PositiveInt = 1
    n: PositiveInt = 1
    ell: Optional[PositiveFloat] = None

    @model_validator(mode="before")
    @classmethod
    def _default_ell(cls, data):
        if isinstance(data, dict) and data.get("kind") == "torus" and data.get("ell") is None:
            data = {**data, "ell": 1.0}
        return data

    @model_validator(mode="after")
    def _check_torus(self) -> "SpaceSpec":
        if self.kind == "torus" and self.n != 1:
            raise ValueError("torus spaces support n = 1 only")
        return self

    @property
    def dim(self) -> int:
        return self.m * self.n

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"


# c_inv: preset name, diagonal vector or dense matrix
CInv = Union[Literal["identity", "neal"], list[float], list[list[float]]]


class ZeroPotentialSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    variant: Literal["zero"] = "zero"


class QuadraticPotentialSpec(BaseModel):
    """U(x) = 1/2 x^T C^{-1} x"""

    model_config = ConfigDict(frozen=True)

    variant: Literal["quadratic"] = "quadratic"
    c_inv: CInv = "identity"


class QuadraticPlusConvexSpec(BaseModel):
    """U(x) = 1/2 x^T C^{-1} x + G(x) with G convex and L_G-gradient-Lipschitz"""

    model_config = ConfigDict(frozen=True)

    variant: Literal["quadratic_plus_convex"] = "quadratic_plus_convex"
    c_inv: CInv = "identity"
    perturbation: Literal["pseudo_huber", "softplus"] = "pseudo_huber"
    lipschitz: NonNegativeFloat = Field(0.0, description="L_G, Lipschitz constant of grad G")


class TorusCosineSpec(BaseModel):
    """Local cosine wells plus cosine pair interactions along a neighbor graph"""

    model_config = ConfigDict(frozen=True)

    variant: Literal["torus_cosine"] = "torus_cosine"
    amp_local: NonNegativeFloat = 0.0
    amp_pair: NonNegativeFloat = 0.0
    neighbor_graph: Union[Literal["none", "ring"], list[tuple[NonNegativeInt, NonNegativeInt]]] = "none"
    ell: Optional[PositiveFloat] = None


PotentialSpec = Annotated[
    Union[ZeroPotentialSpec, QuadraticPotentialSpec, QuadraticPlusConvexSpec, TorusCosineSpec],
    Field(discriminator="variant"),
]


class FlowConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["exact", "verlet"] = "exact"
    # None picks 1e-3 of the potential's characteristic period
    step: Optional[PositiveFloat] = None


def grid_times(t_end: float, step: float) -> np.ndarray:
    """Uniform record grid 0, step, 2*step, ... up to t_end"""
    count = int(np.floor(t_end / step + 1e-9))
    return step * np.arange(count + 1, dtype=float)


class AndersenConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: PositiveFloat = Field(alias="lambda", description="collision frequency")
    beta: PositiveFloat = 1.0
    t_end: NonNegativeFloat = 1.0
    flow: FlowConfig = FlowConfig()
    record_step: PositiveFloat = 0.1
    record_times: Optional[list[NonNegativeFloat]] = None

    @model_validator(mode="after")
    def _check_record(self) -> "AndersenConfig":
        if self.record_times is not None:
            times = list(self.record_times)
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("record_times must be strictly increasing")
            if times and times[-1] > self.t_end:
                raise ValueError("record_times must not exceed t_end")
        return self

    def times(self) -> np.ndarray:
        if self.record_times is not None:
            return np.asarray(self.record_times, dtype=float)
        return grid_times(self.t_end, self.record_step)


class CouplingConfig(AndersenConfig):
    kind: Literal["synchronous", "mirror"] = "mirror"
    gamma: NonNegativeFloat = 0.0

    @model_validator(mode="after")
    def _check_gamma(self) -> "CouplingConfig":
        if self.kind == "synchronous" and self.gamma != 0.0:
            raise ValueError("synchronous coupling requires gamma = 0")
        return self


# ----- run-config file sections -----


class DynamicsSection(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lambda_: PositiveFloat = Field(1.0, alias="lambda")
    beta: PositiveFloat = 1.0
    t_end: NonNegativeFloat = 5.0
    flow_mode: Literal["exact", "verlet"] = "exact"
    flow_step: Optional[PositiveFloat] = None
    record_step: PositiveFloat = 0.1


class CouplingSection(BaseModel):
    kind: Literal["synchronous", "mirror"] = "mirror"
    gamma: Union[Literal["auto"], NonNegativeFloat] = "auto"


DistanceKind = Literal["rho_theorem", "rho_simple", "rho_squared_wah"]
SweepAxis = Literal["lambda", "lambda_per_m", "m", "gamma", "beta"]


class ExperimentSection(BaseModel):
    replicas: PositiveInt = 10_000
    seed: NonNegativeInt = 0
    distance: DistanceKind = "rho_simple"
    initial: Literal["antipodal", "offset", "stationary_vs_point"] = "antipodal"
    # z0 for the offset sampler (scalar broadcast or full vector)
    offset: Union[float, list[float]] = 1.0
    record_times: Optional[list[NonNegativeFloat]] = None
    fit_window: Optional[tuple[NonNegativeFloat, NonNegativeFloat]] = None
    eval_time: Optional[NonNegativeFloat] = None
    sweep_axis: Optional[SweepAxis] = None
    sweep_values: list[float] = []


class OutputSection(BaseModel):
    dir: Optional[Path] = None
    prefix: str = "run"


def _is_diagonal(c_inv: CInv) -> bool:
    if isinstance(c_inv, str):
        return True
    return len(c_inv) == 0 or not isinstance(c_inv[0], (list, tuple))


class RunConfig(BaseModel):
    """Full description of one experiment; re-validated at load time"""

    model_config = ConfigDict(populate_by_name=True)

    space: SpaceSpec = SpaceSpec(kind="torus", m=10)
    potential: PotentialSpec = ZeroPotentialSpec()
    dynamics: DynamicsSection = DynamicsSection()
    coupling: CouplingSection = CouplingSection()
    experiment: ExperimentSection = ExperimentSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        space, pot = self.space, self.potential
        d = space.dim

        if space.is_torus and pot.variant in ("quadratic", "quadratic_plus_convex"):
            raise ValueError(f"potential '{pot.variant}' is not periodic; use it on euclidean space")
        if not space.is_torus and pot.variant == "torus_cosine":
            raise ValueError("potential 'torus_cosine' requires a torus space")

        if pot.variant in ("quadratic", "quadratic_plus_convex") and not isinstance(pot.c_inv, str):
            if _is_diagonal(pot.c_inv):
                if len(pot.c_inv) != d:
                    raise ValueError(f"c_inv has {len(pot.c_inv)} entries, expected m*n = {d}")
            elif len(pot.c_inv) != d or any(len(row) != d for row in pot.c_inv):
                raise ValueError(f"c_inv must be a {d}x{d} matrix")

        if pot.variant == "torus_cosine":
            if pot.ell is None:
                self.potential = pot.model_copy(update={"ell": space.ell})
            elif abs(pot.ell - space.ell) > 1e-12 * space.ell:
                raise ValueError("potential.ell differs from space.ell")
            if not isinstance(pot.neighbor_graph, str):
                for i, j in pot.neighbor_graph:
                    if i == j or i >= space.m or j >= space.m:
                        raise ValueError(f"invalid neighbor edge ({i}, {j}) for m = {space.m}")

        if self.dynamics.flow_mode == "exact":
            exact_ok = pot.variant == "zero" or (
                pot.variant == "quadratic" and not space.is_torus and _is_diagonal(pot.c_inv)
            )
            if not exact_ok:
                raise ValueError(
                    f"exact flow is only available for zero or diagonal quadratic potentials, not '{pot.variant}'"
                )

        if self.coupling.gamma == "auto" and self.coupling.kind == "mirror" and not space.is_torus:
            raise ValueError("gamma = 'auto' is defined on the torus only; give a number for euclidean mirror coupling")

        exp = self.experiment
        if exp.distance in ("rho_theorem", "rho_simple") and not space.is_torus:
            raise ValueError(f"distance '{exp.distance}' requires a torus space")
        if exp.distance == "rho_squared_wah" and (
            space.is_torus or pot.variant not in ("quadratic", "quadratic_plus_convex")
        ):
            raise ValueError("distance 'rho_squared_wah' requires a euclidean quadratic potential")
        if exp.initial == "antipodal" and not space.is_torus:
            raise ValueError("initial 'antipodal' requires a torus space")
        if exp.initial == "offset" and space.is_torus:
            raise ValueError("initial 'offset' requires a euclidean space")
        if isinstance(exp.offset, list) and len(exp.offset) != d:
            raise ValueError(f"experiment.offset has {len(exp.offset)} entries, expected {d}")
        if exp.record_times is not None and exp.record_times and exp.record_times[-1] > self.dynamics.t_end:
            raise ValueError("experiment.record_times must not exceed dynamics.t_end")
        if exp.fit_window is not None and exp.fit_window[0] >= exp.fit_window[1]:
            raise ValueError("fit_window must satisfy t0 < t1")
        return self

    def flow_config(self) -> FlowConfig:
        return FlowConfig(mode=self.dynamics.flow_mode, step=self.dynamics.flow_step)

    def andersen_config(self) -> AndersenConfig:
        dyn = self.dynamics
        return AndersenConfig(
            lambda_=dyn.lambda_,
            beta=dyn.beta,
            t_end=dyn.t_end,
            flow=self.flow_config(),
            record_step=dyn.record_step,
            record_times=self.experiment.record_times,
        )

    def resolved_gamma(self) -> float:
        if self.coupling.kind == "synchronous":
            return 0.0
        if self.coupling.gamma == "auto":
            from .metrics import torus_params

            params = torus_params(
                self.dynamics.beta, self.dynamics.lambda_, self.space.m, self.space.ell, 0.0, 0.0
            )
            return params.gamma
        return float(self.coupling.gamma)

    def coupling_config(self) -> CouplingConfig:
        base = self.andersen_config().model_dump()
        return CouplingConfig(**base, kind=self.coupling.kind, gamma=self.resolved_gamma())
