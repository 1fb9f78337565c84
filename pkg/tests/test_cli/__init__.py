# CLI tests for forgetmari
