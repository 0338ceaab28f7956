"""heatbench: a heat-pump building control workbench.

Simulates a 2R2C building heated by an air-source heat pump, trains a
model-free PPO controller on it, and benchmarks the result against a
receding-horizon MPC that plans on the exact model, including a
demand-response variant with a time-varying electricity price.
"""

__version__ = "0.1.0"
