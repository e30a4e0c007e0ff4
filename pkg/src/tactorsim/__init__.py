"""Simulated cutaneous-feedback teleoperation rig.

Five-bar tactor station kinematics, skin-contact motion patterns, a
device-level control loop with collision arbitration, passive-pivoting
grasp physics, a scripted trial harness, and a streaming teleop service.
"""

__version__ = "0.1.0"
