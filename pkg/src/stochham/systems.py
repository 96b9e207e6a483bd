"""Reference systems and random polynomial Hamiltonians for tests and scripts."""

from __future__ import annotations

import numpy as np

from .field import StochasticField, field_from_hamiltonian


def harmonic_field() -> StochasticField:
    return StochasticField.build(1, 0, ["p"], ["-q"], label="harmonic")


def kubo_field(a: float = 1.0, s: float = 0.5) -> StochasticField:
    """Kubo oscillator: H_D = a(q^2+p^2)/2, H_S = s(q^2+p^2)/2."""
    return StochasticField.build(1, 1, ["a*p"], ["-a*q"], [["s*p"]], [["-s*q"]],
                                 params={"a": a, "s": s}, label="kubo")


def noncommuting_field() -> StochasticField:
    """H_D = (q^2+p^2)/2, H_S = q: Hamiltonian, but {H_D, H_S} != 0."""
    return StochasticField.build(1, 1, ["p"], ["-q"], [["0"]], [["-1"]], label="noncommuting")


def random_monomial(rng: np.random.Generator, d: int, degree: int) -> str:
    names = [f"q{i}" for i in range(d)] + [f"p{i}" for i in range(d)]
    k = int(rng.integers(1, degree + 1))
    powers = np.bincount(rng.integers(0, 2 * d, size=k), minlength=2 * d)
    coef = float(np.round(rng.uniform(-2, 2), 6))
    factors = [repr(coef)]
    for name, e in zip(names, powers):
        if e == 1:
            factors.append(name)
        elif e > 1:
            factors.append(f"{name}^{e}")
    return "*".join(factors)


def random_polynomial(rng: np.random.Generator, d: int, degree: int, terms: int = 5) -> str:
    """Sparse random polynomial in q0..,p0.. with coefficients in [-2, 2]."""
    return " + ".join(random_monomial(rng, d, degree) for _ in range(terms))


def random_hamiltonian_system(rng: np.random.Generator, d: int | None = None, n: int | None = None,
                              degree: int = 4, terms: int = 5):
    """Random pair (H_D, H_S) and its canonical field; returns (field, H_D, [H_S])."""
    if d is None:
        d = int(rng.integers(1, 4))
    if n is None:
        n = int(rng.integers(0, 3))
    hd = random_polynomial(rng, d, degree, terms)
    hs = [random_polynomial(rng, d, degree, terms) for _ in range(n)]
    f = field_from_hamiltonian(hd, hs, d, label=f"random-d{d}-n{n}")
    return f, hd, hs
