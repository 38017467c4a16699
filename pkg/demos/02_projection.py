# %% [markdown]
# # Projecting an image onto a generator
#
# The toy generator maps an 8-d latent to a 64x64 image. Projection searches
# the latent space by gradient descent so the generated image matches a target.

# %%
import numpy as np

from anoscore import ProjectionConfig, ToyGenerator, ToyGeneratorParams, project
from anoscore.imagecore import quantize

gen = ToyGenerator(ToyGeneratorParams.initialize(8, 32, seed=0))
z_star = np.random.default_rng(1).standard_normal(8)
target = quantize(gen.generate(z_star), -1.0, 1.0)

# %% [markdown]
# With the default step size of 0.05 the loss falls slowly: the pyramid distance
# averages over pixels, so its latent gradient is small.

# %%
slow = project(gen, target, ProjectionConfig())
print("default:  final/initial =", round(slow.final_loss / slow.initial_loss, 4))

# %% [markdown]
# A larger step, kept safe by backtracking, recovers the target.

# %%
fast = project(gen, target, ProjectionConfig(step_size=10.0))
print("step 10:  final/initial =", round(fast.final_loss / fast.initial_loss, 6))
print("latent error:", np.linalg.norm(fast.z - z_star))
print("halved-out steps:", fast.skipped_steps)
