"""Mode-decomposition verification of singular single- and double-coating cloaks.

Modules: ``geometry`` (coating maps), ``media`` (pushed-forward tensors),
``helmholtz`` (scalar DtN invisibility and hidden boundary conditions),
``maxwell`` (TE/TM admittances and single-coating verdicts), ``cylinder``
(SHS-lined cylinder scattering and axis traces) and ``harness`` (configs,
runner, CLI).
"""

__version__ = "0.1.0"
