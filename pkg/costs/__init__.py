"""Lagrangians, terminal costs and cost functionals"""
