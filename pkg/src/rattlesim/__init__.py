"""Monte Carlo simulation of critical slowing down and critical speeding up."""
