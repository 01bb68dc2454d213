"""Simulate a small joint dataset and fit it with the blocked Gibbs sampler.

This runs at a reduced desk scale (coarse grid, reduced knots, short chain)
so it finishes in well under a minute while still exercising every block
update: trait means, reflectance coefficient curves, random effects, the
latent covariance, shrinkage scales, and the log-variance Metropolis step.
"""

import numpy as np

from traitspectra import Parameters, PriorConfig, SamplerConfig, WavelengthGrid, run_chain, simulate_dataset
from traitspectra.bases import build_bases

rng = np.random.default_rng(7)

grid = WavelengthGrid(np.arange(450.0, 950.0, 10.0))
bases = build_bases(grid, alpha_spacing=50, u_spacing=100, beta_spacing=250, sigma_spacing=100)
s, p, n = 4, 5, 120
d = s + bases.n_u

# moderately cross-correlated latent structure
F = 0.8 * rng.standard_normal((d, 2))
truth = Parameters(
    alpha_T=rng.standard_normal(s),
    B_T=rng.standard_normal((s, p)),
    alpha_star_R=rng.standard_normal(bases.n_alpha),
    B_R=0.4 * rng.standard_normal((p, bases.n_beta)),
    gamma_sigma=np.r_[np.log(0.15), np.zeros(bases.n_sigma - 1)],
    Omega=F @ F.T + 0.4 * np.eye(d),
    sigma2_alpha=1.0,
    sigma2_beta=np.ones(p),
)
E = rng.standard_normal((n, p))
data = simulate_dataset(truth, E, bases, seed=21)
print(f"simulated n={data.n} replicates, {data.s} traits, {data.n_wavelengths} wavelengths")

config = SamplerConfig(n_iterations=4000, n_burnin=2000, n_keep=200, seed=3)
# proper prior on the latent covariance: the near-flat default admits a
# degenerate trait/spectrum coupling mode at this reduced scale
priors = PriorConfig(wishart_rate=1.0, wishart_df_offset=3.0)
store = run_chain(data, bases, config, priors=priors)
print(f"retained {len(store)} states; "
      f"log-variance acceptance after burn-in {store.post_burnin_accept_rate:.2f}")

B = np.stack([state.B_T for state in store.states])
post_mean = B.mean(axis=0)
lo = np.quantile(B, 0.05, axis=0)
hi = np.quantile(B, 0.95, axis=0)
covered = (truth.B_T >= lo) & (truth.B_T <= hi)
print("\ntrait coefficient recovery (true value vs posterior mean, 90% interval):")
for t in range(s):
    for k in range(p):
        mark = "*" if covered[t, k] else " "
        print(f"  B_T[{t},{k}]: true {truth.B_T[t, k]:+.2f}  "
              f"mean {post_mean[t, k]:+.2f}  [{lo[t, k]:+.2f}, {hi[t, k]:+.2f}] {mark}")
print(f"\n{covered.mean():.0%} of true coefficients inside their 90% interval")
