"""Numerical toolkit for input-power-to-state stability analysis.

Modules:
    comparison_functions  -- class P/K/K-infinity algebra and factorizations
    signals               -- piecewise-constant inputs and input measures
    simulator             -- aligned fixed-step RK4, built-in systems, probes
    lyapunov_tools        -- Dini derivatives, form checks, gain synthesis
    stability_certificates-- certificates, envelopes, transformers, falsifier
    converse_construction -- sampled converse Lyapunov construction
    cli_harness           -- JSON-driven experiment runner (``ipss-lab``)
"""

__version__ = "0.1.0"
