/** The single deployment setting: where the monitor's HTTP API lives.
 *  Empty string means same-origin. */
export const API_BASE_URL = "";
