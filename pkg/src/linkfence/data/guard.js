(function () {
  /* Pop-up name scrubbing: a window opened by a foreign origin must not
     receive smuggled data through window.name. Cross-origin reads of the
     opener throw, which itself proves the opener is foreign. */
  try {
    if (window.opener && window.name) {
      var foreignOpener = true;
      try {
        foreignOpener = window.opener.location.origin !== window.location.origin;
      } catch (crossOriginAccess) {
        foreignOpener = true;
      }
      if (foreignOpener) {
        window.name = "";
      }
    }
  } catch (ignored) {}

  /* Frame target sanitization: the query string may name a frame target,
     minus its leading "?"; anything containing ":" (absolute or scheme'd
     destinations) is refused. */
  var targetPage = "" + window.location.search;
  if (targetPage !== "" && targetPage !== "undefined") {
    targetPage = targetPage.substring(1);
  }
  if (targetPage.indexOf(":") !== -1) {
    targetPage = "undefined";
  }
  window.loadFrames = function () {
    if (targetPage !== "" && targetPage !== "undefined" && top.classFrame) {
      top.classFrame.location = targetPage;
    }
  };
})();
