"""Organization classification: label organizations with environmental issues
or 2-digit SIC codes from text harvested off the web and EDGAR filings."""

__version__ = "0.1.0"
