from urducorpus.components.plot_data import CategoryBreakdown, LearningRateCurve, TokenCountBars

__all__ = ['CategoryBreakdown', 'LearningRateCurve', 'TokenCountBars']
