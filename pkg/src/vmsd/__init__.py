"""Streamline-diffusion space-time schemes for the Vlasov-Maxwell system,
with a Nitsche penalty solver for the second-order field formulation."""

__version__ = "0.1.0"
