"""
Remediation command group for the a11yfix CLI.
"""
