"""famplan: multi-actor weekly learning-plan orchestration.

Decomposes family learning goals into subtasks, schedules them across
caregivers under availability and expertise constraints, detects and repairs
conflicts, scores plan quality, and serves a coordination API.
"""

__version__ = "0.1.0"
