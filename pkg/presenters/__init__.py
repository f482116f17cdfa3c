"""Presenters package initialization."""

from presenters.report_presenter import ReportPresenter

__all__ = ['ReportPresenter']
