"""Log-log RMSE convergence figures for rqmcis experiment tables."""

from rqmcis_plots.figures import (
    CSV_HEADER,
    FigureSpec,
    PanelData,
    RenderResult,
    load_rmse_csv,
    main,
    render,
)

__version__ = "0.1.0"
