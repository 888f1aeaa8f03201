"""Binary clip, trajectory, checkpoint and dataset layout formats."""
