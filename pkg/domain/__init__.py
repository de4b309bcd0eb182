"""Spiral state constraint and counterexample instances"""
