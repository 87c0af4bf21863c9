# SPDX-License-Identifier: Apache-2.0
"""Predict which SFT checkpoints will respond best to RL with verifiable rewards."""

from ._rlready import *  # noqa: F401,F403
from ._rlready import __version__, VERIFIER_RULES  # noqa: F401
