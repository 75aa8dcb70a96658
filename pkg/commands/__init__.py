"""Subcommand groups; each module exposes register(subparsers)"""
