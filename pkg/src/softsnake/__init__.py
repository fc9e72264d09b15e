"""Obstacle-aware soft-snake locomotion workbench.

Modules:

* :mod:`softsnake.cpg` — Matsuoka oscillator network, tonic-input
  decoding/composition, bias and frequency analysis.
* :mod:`softsnake.env` — planar rigid-chain proxy robot with anisotropic
  drag, penalty contact, and four-patch contact sensing.
* :mod:`softsnake.potential` — attractive/repulsive potential field and
  the shared per-step reward.
* :mod:`softsnake.policy` — feed-forward actor-critic networks (C1 with
  an option head over frequency ratios, R2 action-only) and the clipped
  surrogate update.
* :mod:`softsnake.game` — event-triggered two-player environment
  protocol, rollout, policy evaluation, and fictitious play.
* :mod:`softsnake.scenarios` — obstacle-maze generation and exact
  benchmark metrics.
* :mod:`softsnake.config` / :mod:`softsnake.cli` / :mod:`softsnake.plots`
  — configuration, command line, artifact export.
"""

__version__ = "0.1.0"

from . import cpg, env, potential  # noqa: F401

__all__ = ["cpg", "env", "potential", "__version__"]
