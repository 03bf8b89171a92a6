"""Make network directory a Python package"""
