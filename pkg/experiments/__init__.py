"""Subject-independent experiment pipeline: planner -> executor -> verifier"""
