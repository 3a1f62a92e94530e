__title__ = "npas"
__description__ = "Parameter allocation search for layered networks under a fixed parameter budget."
__version__ = "0.3.0"
