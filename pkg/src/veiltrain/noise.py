"""Jointly sampled model perturbation: no party ever sees the noise.

Direction and magnitude are sampled separately. A standard Gaussian vector
(Box-Muller over jointly generated uniforms) is normalized onto the unit
sphere; its spherical symmetry makes the direction uniform. The magnitude is
a Gamma(d, 2/(n*epsilon*reg)) draw built from d unit-rate exponentials, each
obtained as -ln(u) by inverse transform sampling, summed and scaled. The
scaled direction is added to the secret-shared coefficients; opening the sum
publishes the privacy-protected model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fixedpoint import encode
from .kernels import joint_uniform, secure_ln, secure_sin_cos, secure_sqrt
from .training import l2_normalize

# uniforms live in (0, 1]; -2 ln(u) <= 2 * l * ln 2 < 2^6 at default precision
_LN_MAGNITUDE_BITS = 1
_SQRT_MAGNITUDE_BITS = 6


@dataclass(frozen=True)
class DpParams:
    """Public privacy parameters of the output perturbation."""

    epsilon: float
    lambda_reg: float
    n: int
    d: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.lambda_reg <= 0:
            raise ValueError("lambda_reg must be positive")
        if self.n <= 0 or self.d <= 0:
            raise ValueError("n and d must be positive")

    @property
    def scale(self) -> float:
        """Noise scale c = 2 / (n * epsilon * lambda_reg)."""
        return 2.0 / (self.n * self.epsilon * self.lambda_reg)


def gaussian_pair_count(d: int) -> int:
    """Box-Muller pairs one sampling of dimension d consumes."""
    pairs = (d + 1) // 2
    if d % 2 == 1:
        pairs += 1  # the odd tail re-enters with a length-2 sampling
    return pairs


def gaussian_vector(eng, d: int, batch: tuple = ()):
    """Secret shares of d independent N(0, 1) samples (leading batch axes).

    ceil(d/2) Box-Muller pairs: r = sqrt(-2 ln u), theta = 2 pi v, emitting
    (r cos theta, r sin theta). An odd d draws one more length-2 vector and
    keeps only its first coordinate.
    """
    l = eng.frac_bits
    pairs = (d + 1) // 2
    with eng.phase("gaussian"):
        u = joint_uniform(eng, (*batch, pairs))
        v = joint_uniform(eng, (*batch, pairs))
        neg2ln = eng.mul_public_int(secure_ln(eng, u, magnitude_bits=_LN_MAGNITUDE_BITS), -2)
        r = secure_sqrt(eng, neg2ln, magnitude_bits=_SQRT_MAGNITUDE_BITS)
        theta = eng.trunc(eng.mul_public_int(v, int(encode(2 * np.pi, eng.cfg))), l)
        sin, cos = secure_sin_cos(eng, theta)
        even = eng.mul(r, cos, l)
        odd = eng.mul(r, sin, l)
        out = np.stack([even, odd], axis=-1).reshape(*batch, 2 * pairs)
        out = np.ascontiguousarray(out[..., :d])
    if d % 2 == 1:
        extra = gaussian_vector(eng, 2, batch)
        out[..., d - 1] = extra[..., 0]
    return out


def gamma_magnitude(eng, dp: DpParams, batch: tuple = ()):
    """Secret share of one Gamma(d, c) draw: the sum of d unit exponentials
    -ln(u_i), scaled by the public constant c."""
    l = eng.frac_bits
    with eng.phase("gamma"):
        u = joint_uniform(eng, (*batch, dp.d))
        exp_sum = eng.neg(eng.sum(secure_ln(eng, u, magnitude_bits=_LN_MAGNITUDE_BITS),
                                  axis=-1))
        return eng.trunc(eng.mul_public_int(exp_sum, int(encode(dp.scale, eng.cfg))), l)


def perturb_weights(eng, w, dp: DpParams, batch: tuple = ()):
    """Output perturbation on shares: w + gamma * s with s uniform on the
    unit sphere and gamma ~ Gamma(d, c). With a batch shape, each batch row
    is an independent noise draw added to the same coefficients."""
    with eng.phase("perturb"):
        direction = gaussian_vector(eng, dp.d, batch)
        direction = l2_normalize(eng, direction)
        gamma = gamma_magnitude(eng, dp, batch)
        eta = eng.mul(direction, gamma[..., None], eng.frac_bits)
        return eng.add(w, eta)
