"""Formal series solver for self-dual Einstein ACH metrics and CR GJMS operators."""
