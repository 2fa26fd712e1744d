class InvalidSpecException(Exception):
    pass


class TooLargeException(Exception):
    pass


class TraceException(Exception):
    pass


class BudgetException(Exception):
    def __init__(self, message, attempts=None):
        super(BudgetException, self).__init__("%s (attempts=%s)" % (message, attempts))
        self.attempts = attempts


class ConfigException(Exception):
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = "%s at line %s, column %s" % (message, line, column if column is not None else 1)
        super(ConfigException, self).__init__(message)
        self.line = line
        self.column = column


class FitException(Exception):
    def __init__(self, message, residuals=None):
        super(FitException, self).__init__(message)
        self.residuals = list(residuals) if residuals is not None else []
