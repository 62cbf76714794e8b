"""
Config & constants for the noise-calibration toolkit.

Every numerical tolerance the modules rely on lives here so a reviewer can
audit them in one place. A few values can be overridden from the environment
(handy when running the CLI from scripts or CI).
"""

from __future__ import annotations

import os

# =========================
# Tool identity
# =========================
TOOL_NAME = "pufferfish-calibrate"
TOOL_VERSION = "0.3.0"

# =========================
# Distribution arithmetic
# =========================
MASS_TOLERANCE = 1e-9            # |Σ mass − 1| allowed on validated inputs
SUPPORT_MERGE_TOLERANCE = 1e-12  # support values closer than this are one atom
CDF_TIE_TOLERANCE = 1e-12        # F_p(x) vs F_q(x) comparisons
PLAN_PRUNE_TOLERANCE = 1e-12     # coupling entries below this are dropped

# =========================
# Root finding (MGF calibration)
# =========================
BRENT_XTOL = 1e-10
BRENT_MAXITER = 200
BRACKET_HALVINGS = 1100  # 2**-1100 underflows double precision; never reached in practice

# =========================
# Mechanism / verification
# =========================
VERIFY_SLACK = 1e-9          # additive slack on ε when judging a ratio bound
LOG_SPACE_THRESHOLD = 700.0  # |exponent| above which mixtures are evaluated in log space

# =========================
# Logging
# =========================
LOG_LEVEL = os.environ.get("PUFFERFISH_LOG_LEVEL", "WARNING").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
