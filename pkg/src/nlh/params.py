"""Denoiser parameters and the named profiles."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

from .lhwt import is_power_of_two

PROFILES = {
    # sqrt(n) = 8, K = 4 for moderate Gaussian noise
    "awgn-low": dict(patch_side=8, iterations=4, stride=4),
    # sqrt(n) = 10, K = 5 for strong Gaussian noise
    "awgn-high": dict(patch_side=10, iterations=5, stride=4),
    # sqrt(n) = 7, K = 2 for camera noise
    "real": dict(patch_side=7, iterations=2, stride=3),
}

# awgn-low covers sigma below this value (on the 0-255 scale)
AWGN_HIGH_FROM = 50.0


@dataclass(frozen=True)
class NlhParams:
    patch_side: int = 7
    window: int = 40
    m1: int = 16
    q1: int = 4
    m2: int = 64
    q2: int = 8
    tau: float = 2.0
    lam: float = 0.6
    iterations: int = 2
    stride: int = 3
    sigma_override: float | None = None
    reestimate_sigma_per_iter: bool = False
    threshold_law: str = "sigma"

    @property
    def n(self) -> int:
        return self.patch_side * self.patch_side

    def validate(self) -> "NlhParams":
        if self.patch_side < 1:
            raise ValueError("patch_side must be >= 1")
        for name in ("m1", "q1", "m2", "q2"):
            value = getattr(self, name)
            if not is_power_of_two(value):
                raise ValueError(f"{name} must be a power of 2, got {value}")
        if self.q1 > self.n or self.q2 > self.n:
            raise ValueError(f"q1={self.q1} and q2={self.q2} must not exceed n={self.n}")
        if self.q1 < 2:
            raise ValueError("q1 must be >= 2 (noise estimation compares rows)")
        if self.window < 1 or self.stride < 1:
            raise ValueError("window and stride must be >= 1")
        if self.stride > self.patch_side:
            raise ValueError(f"stride {self.stride} exceeds patch_side {self.patch_side}; pixels would go uncovered")
        if self.window * self.window < max(self.m1, self.m2):
            raise ValueError(
                f"a {self.window}x{self.window} window cannot hold m={max(self.m1, self.m2)} patches")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if self.iterations < 1:
            raise ValueError("iterations (K) must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.threshold_law not in ("sigma2", "sigma"):
            raise ValueError(f"threshold_law must be 'sigma2' or 'sigma', got {self.threshold_law!r}")
        if self.sigma_override is not None and self.sigma_override < 0:
            raise ValueError("sigma_override must be non-negative")
        return self

    def with_overrides(self, **kw) -> "NlhParams":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


def profile(name: str, stage2_small: bool = False, **overrides) -> NlhParams:
    """Resolve a named profile, then apply non-``None`` overrides.

    ``stage2_small`` switches stage 2 to ``q2=4, m2=16``.
    """
    if name == "custom":
        base = NlhParams()
    elif name in PROFILES:
        base = replace(NlhParams(), **PROFILES[name])
    else:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)} or 'custom'")
    if stage2_small:
        base = replace(base, m2=16, q2=4)
    return base.with_overrides(**overrides).validate()


def profile_for_sigma(sigma: float) -> str:
    return "awgn-high" if sigma >= AWGN_HIGH_FROM else "awgn-low"


def check_profile_sigma(name: str, sigma: float | None):
    """Reject AWGN profiles used outside their noise range."""
    if sigma is None:
        return
    if name == "awgn-low" and sigma >= AWGN_HIGH_FROM:
        raise ValueError(
            f"profile awgn-low covers sigma < {AWGN_HIGH_FROM:g}; use --profile awgn-high for sigma={sigma:g}")
    if name == "awgn-high" and sigma < AWGN_HIGH_FROM:
        raise ValueError(
            f"profile awgn-high covers sigma >= {AWGN_HIGH_FROM:g}; use --profile awgn-low for sigma={sigma:g}")
