/** All figure styling lives here so figure diffs stay reviewable. */

export const WIDTH = 720;
export const HEIGHT = 440;
export const MARGIN = { top: 44, right: 24, bottom: 52, left: 72 };

export const FONT_FAMILY = "Helvetica, Arial, sans-serif";
export const FONT_SIZE_AXIS = 12;
export const FONT_SIZE_TITLE = 15;
export const FONT_SIZE_LEGEND = 12;

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

export const AXIS_COLOR = "#333333";
export const GRID_COLOR = "#dddddd";
export const STROKE_WIDTH = 1.6;

/** Lower-bound curves are drawn dashed, recognized by their column suffix. */
export const BOUND_SUFFIX = "_rcrlb";
export const BOUND_DASH = "6,4";

export const X_TICKS = 6;
export const Y_TICKS = 6;
